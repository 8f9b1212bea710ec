#include "hcf/report.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace hcf {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (size_t c = 0; c < table.columns.size(); ++c)
    out << table.columns[c] << (c + 1 == table.columns.size() ? "\n" : ",");
  char buf[64];
  for (const auto& row : table.rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", row[c]);
      out << buf << (c + 1 == row.size() ? "\n" : ",");
    }
  }
}

void write_svg_lines(const std::string& path, const std::string& title,
                     const std::vector<double>& x,
                     const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  const int W = 720, H = 420, ML = 70, MR = 20, MT = 40, MB = 40;
  double xmin = x.empty() ? 0 : x.front(), xmax = x.empty() ? 1 : x.back();
  double ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (double v : s.second) {
      if (!std::isfinite(v)) continue;
      if (first) { ymin = ymax = v; first = false; }
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (ymax - ymin < 1e-300) { ymax += 1.0; ymin -= 1.0; }
  if (xmax - xmin < 1e-300) xmax = xmin + 1.0;
  auto px = [&](double v) { return ML + (v - xmin) / (xmax - xmin) * (W - ML - MR); };
  auto py = [&](double v) { return H - MB - (v - ymin) / (ymax - ymin) * (H - MT - MB); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";
  out << "<line x1='" << ML << "' y1='" << H - MB << "' x2='" << W - MR << "' y2='" << H - MB
      << "' stroke='black'/>\n";
  out << "<line x1='" << ML << "' y1='" << MT << "' x2='" << ML << "' y2='" << H - MB
      << "' stroke='black'/>\n";
  char lab[64];
  std::snprintf(lab, sizeof lab, "%.3g", ymin);
  out << "<text x='5' y='" << H - MB << "' font-size='11'>" << lab << "</text>\n";
  std::snprintf(lab, sizeof lab, "%.3g", ymax);
  out << "<text x='5' y='" << MT + 10 << "' font-size='11'>" << lab << "</text>\n";
  std::snprintf(lab, sizeof lab, "%.3g", xmin);
  out << "<text x='" << ML << "' y='" << H - MB + 16 << "' font-size='11'>" << lab << "</text>\n";
  std::snprintf(lab, sizeof lab, "%.3g", xmax);
  out << "<text x='" << W - MR - 30 << "' y='" << H - MB + 16 << "' font-size='11'>" << lab
      << "</text>\n";
  int ci = 0;
  for (const auto& s : series) {
    out << "<polyline fill='none' stroke='" << colors[ci % 6] << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < s.second.size() && i < x.size(); ++i) {
      if (!std::isfinite(s.second[i])) continue;
      out << px(x[i]) << "," << py(s.second[i]) << " ";
    }
    out << "'/>\n";
    out << "<text x='" << W - MR - 150 << "' y='" << MT + 14 + 14 * ci << "' fill='"
        << colors[ci % 6] << "' font-size='11'>" << s.first << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
}

void Summary::add(const std::string& name, double value) {
  entries[name] = {value, 0.0, false, true};
}

void Summary::add_lower(const std::string& name, double value, double tolerance) {
  entries[name] = {value, tolerance, true, value >= -tolerance};
}

void Summary::add_bound(const std::string& name, double value, double tolerance) {
  entries[name] = {value, tolerance, true, std::abs(value) <= tolerance};
}

bool Summary::all_pass() const {
  for (const auto& [k, e] : entries)
    if (!e.pass) return false;
  return true;
}

std::string Summary::to_json() const {
  nlohmann::json j;
  for (const auto& [k, e] : entries) {
    nlohmann::json je;
    je["value"] = e.value;
    if (e.has_tolerance) je["tolerance"] = e.tolerance;
    je["pass"] = e.pass;
    j["checks"][k] = std::move(je);
  }
  for (const auto& [k, v] : info) j["info"][k] = v;
  j["pass"] = all_pass();
  return j.dump(2);
}

}  // namespace hcf
