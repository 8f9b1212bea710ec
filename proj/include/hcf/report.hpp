// CSV series, summary JSON and plain SVG line plots for experiment outputs.
#pragma once

#include <map>
#include <string>
#include <vector>

namespace hcf {

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  void add_row(std::initializer_list<double> r) { rows.emplace_back(r); }
};

// deterministic formatting (%.17g) so identical runs are byte-identical
void write_csv(const std::string& path, const CsvTable& table);

// one polyline per series over a shared x axis
void write_svg_lines(const std::string& path, const std::string& title,
                     const std::vector<double>& x,
                     const std::vector<std::pair<std::string, std::vector<double>>>& series);

struct Summary {
  // name -> (value, tolerance, pass); tolerance NaN when informational
  struct Entry {
    double value = 0.0;
    double tolerance = 0.0;
    bool has_tolerance = false;
    bool pass = true;
  };
  std::map<std::string, Entry> entries;
  std::map<std::string, std::string> info;

  void add(const std::string& name, double value);
  // pass iff value >= -tolerance (lower bound checks)
  void add_lower(const std::string& name, double value, double tolerance);
  // pass iff |value| <= tolerance
  void add_bound(const std::string& name, double value, double tolerance);
  bool all_pass() const;
  std::string to_json() const;
};

void write_text(const std::string& path, const std::string& text);

}  // namespace hcf
