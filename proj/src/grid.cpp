#include "hcf/grid.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>

namespace hcf {

TorusChart::TorusChart(int n_, std::vector<int> size_, std::vector<double> period_)
    : n(n_), size(std::move(size_)), period(std::move(period_)) {
  require(n >= 1, "chart: complex dimension must be >= 1");
  require(static_cast<int>(size.size()) == 2 * n, "chart: need 2n grid sizes");
  require(static_cast<int>(period.size()) == 2 * n, "chart: need 2n periods");
  for (int s : size) require(s >= 4 && s % 2 == 0, "chart: grid sizes must be even and >= 4");
  for (double p : period) require(p > 0.0, "chart: periods must be positive");
}

TorusChart TorusChart::cubic(int n, int pts, double period) {
  return TorusChart(n, std::vector<int>(2 * n, pts), std::vector<double>(2 * n, period));
}

size_t TorusChart::points() const {
  size_t p = 1;
  for (int s : size) p *= static_cast<size_t>(s);
  return p;
}

std::vector<size_t> TorusChart::strides() const {
  std::vector<size_t> st(size.size());
  size_t acc = 1;
  for (int a = static_cast<int>(size.size()) - 1; a >= 0; --a) {
    st[a] = acc;
    acc *= static_cast<size_t>(size[a]);
  }
  return st;
}

double TorusChart::min_spacing() const {
  double h = spacing(0);
  for (int a = 1; a < axes(); ++a) h = std::min(h, spacing(a));
  return h;
}

double TorusChart::coordinate(size_t p, int axis) const {
  const auto st = strides();
  const size_t i = (p / st[axis]) % static_cast<size_t>(size[axis]);
  return static_cast<double>(i) * spacing(axis);
}

Field::Field(TorusChart ch, std::vector<int> dims)
    : chart(std::move(ch)), comp_dims(std::move(dims)) {
  data.assign(static_cast<size_t>(ncomp()) * chart.points(), cplx(0, 0));
}

int Field::ncomp() const {
  int c = 1;
  for (int d : comp_dims) c *= d;
  return c;
}

int Field::comp_index(std::initializer_list<int> idx) const {
  require(static_cast<int>(idx.size()) == static_cast<int>(comp_dims.size()),
          "comp_index: rank mismatch");
  int flat = 0;
  auto it = idx.begin();
  for (size_t r = 0; r < comp_dims.size(); ++r, ++it) flat = flat * comp_dims[r] + *it;
  return flat;
}

double Field::inf_norm() const {
  double m = 0.0;
  for (const cplx& z : data) m = std::max(m, std::abs(z));
  return m;
}

Field& Field::operator+=(const Field& o) {
  require(data.size() == o.data.size(), "field +=: shape mismatch");
  for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  require(data.size() == o.data.size(), "field -=: shape mismatch");
  for (size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
  return *this;
}

Field& Field::operator*=(double s) {
  for (cplx& z : data) z *= s;
  return *this;
}

// ------------------------------------------------------------------ spectral

struct SpectralEngine::Impl {
  TorusChart chart;
  std::vector<fftw_plan> fwd, bwd;       // per axis
  std::vector<std::vector<double>> wave; // wavenumbers per axis, Nyquist zeroed
  mutable std::vector<cplx> scratch;
  mutable std::mutex mu;

  explicit Impl(const TorusChart& ch) : chart(ch) {
    const auto st = chart.strides();
    scratch.resize(chart.points());
    fftw_complex* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    for (int a = 0; a < chart.axes(); ++a) {
      fftw_iodim dim;
      dim.n = chart.size[a];
      dim.is = dim.os = static_cast<int>(st[a]);
      std::vector<fftw_iodim> loops;
      for (int b = 0; b < chart.axes(); ++b) {
        if (b == a) continue;
        fftw_iodim l;
        l.n = chart.size[b];
        l.is = l.os = static_cast<int>(st[b]);
        loops.push_back(l);
      }
      const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
      fwd.push_back(fftw_plan_guru_dft(1, &dim, static_cast<int>(loops.size()), loops.data(),
                                       buf, buf, FFTW_FORWARD, flags));
      bwd.push_back(fftw_plan_guru_dft(1, &dim, static_cast<int>(loops.size()), loops.data(),
                                       buf, buf, FFTW_BACKWARD, flags));
      if (!fwd.back() || !bwd.back()) throw NumericalError("FFTW planning failed");

      const int N = chart.size[a];
      std::vector<double> k(N);
      for (int i = 0; i < N; ++i) {
        const int m = i <= N / 2 ? i : i - N;
        k[i] = 2.0 * kPi * m / chart.period[a];
      }
      k[N / 2] = 0.0;  // odd derivative: drop the Nyquist mode
      wave.push_back(std::move(k));
    }
  }

  ~Impl() {
    for (auto p : fwd) fftw_destroy_plan(p);
    for (auto p : bwd) fftw_destroy_plan(p);
  }
};

SpectralEngine::SpectralEngine(const TorusChart& chart) : impl_(new Impl(chart)) {}
SpectralEngine::~SpectralEngine() = default;

void SpectralEngine::dreal(cplx* dst, const cplx* src, int axis) const {
  auto& im = *impl_;
  std::lock_guard<std::mutex> lock(im.mu);  // plans share the scratch buffer
  const size_t pts = im.chart.points();
  std::memcpy(im.scratch.data(), src, pts * sizeof(cplx));
  fftw_complex* buf = reinterpret_cast<fftw_complex*>(im.scratch.data());
  fftw_execute_dft(im.fwd[axis], buf, buf);
  const auto st = im.chart.strides();
  const size_t stride = st[axis];
  const int N = im.chart.size[axis];
  const auto& k = im.wave[axis];
  const double inv = 1.0 / N;
  for (size_t p = 0; p < pts; ++p) {
    const int i = static_cast<int>((p / stride) % static_cast<size_t>(N));
    im.scratch[p] *= cplx(0.0, k[i]) * inv;
  }
  fftw_execute_dft(im.bwd[axis], buf, buf);
  std::memcpy(dst, im.scratch.data(), pts * sizeof(cplx));
}

std::shared_ptr<SpectralEngine> spectral_engine(const TorusChart& chart) {
  struct Key {
    std::vector<int> size;
    std::vector<double> period;
    bool operator<(const Key& o) const {
      if (size != o.size) return size < o.size;
      return period < o.period;
    }
  };
  static std::map<Key, std::weak_ptr<SpectralEngine>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  Key key{chart.size, chart.period};
  if (auto it = cache.find(key); it != cache.end())
    if (auto sp = it->second.lock()) return sp;
  auto sp = std::make_shared<SpectralEngine>(chart);
  cache[key] = sp;
  return sp;
}

namespace {

void deriv_fd2(cplx* dst, const cplx* src, const TorusChart& chart, int axis) {
  const auto st = chart.strides();
  const size_t stride = st[axis];
  const int N = chart.size[axis];
  const double h = chart.spacing(axis);
  const size_t pts = chart.points();
  std::vector<cplx> tmp(pts);
  for (size_t p = 0; p < pts; ++p) {
    const int i = static_cast<int>((p / stride) % static_cast<size_t>(N));
    const size_t fwd = p + stride * static_cast<size_t>((i + 1) % N - i);
    const size_t bwd = p + stride * static_cast<size_t>((i - 1 + N) % N - i);
    tmp[p] = (src[fwd] - src[bwd]) / (2.0 * h);
  }
  std::memcpy(dst, tmp.data(), pts * sizeof(cplx));
}

}  // namespace

void deriv_real(cplx* dst, const cplx* src, const TorusChart& chart, int axis,
                Backend backend) {
  if (backend == Backend::spectral)
    spectral_engine(chart)->dreal(dst, src, axis);
  else
    deriv_fd2(dst, src, chart, axis);
}

Field dhol(const Field& f, int j, Backend backend) {
  Field out(f.chart, f.comp_dims);
  const size_t pts = f.points();
  std::vector<cplx> dx(pts), dy(pts);
  for (int c = 0; c < f.ncomp(); ++c) {
    deriv_real(dx.data(), f.comp(c), f.chart, 2 * j, backend);
    deriv_real(dy.data(), f.comp(c), f.chart, 2 * j + 1, backend);
    cplx* o = out.comp(c);
    for (size_t p = 0; p < pts; ++p) o[p] = 0.5 * (dx[p] - I() * dy[p]);
  }
  return out;
}

Field dbar(const Field& f, int j, Backend backend) {
  Field out(f.chart, f.comp_dims);
  const size_t pts = f.points();
  std::vector<cplx> dx(pts), dy(pts);
  for (int c = 0; c < f.ncomp(); ++c) {
    deriv_real(dx.data(), f.comp(c), f.chart, 2 * j, backend);
    deriv_real(dy.data(), f.comp(c), f.chart, 2 * j + 1, backend);
    cplx* o = out.comp(c);
    for (size_t p = 0; p < pts; ++p) o[p] = 0.5 * (dx[p] + I() * dy[p]);
  }
  return out;
}

double high_mode_energy_fraction(const Field& f) {
  // crude but adequate: apply the 2/3 truncation to a copy and compare energy
  Field cut = f;
  dealias_23(cut);
  double total = 0.0, kept = 0.0;
  for (size_t i = 0; i < f.data.size(); ++i) {
    total += std::norm(f.data[i]);
    kept += std::norm(cut.data[i]);
  }
  if (total <= 0.0) return 0.0;
  return std::max(0.0, (total - kept) / total);
}

void dealias_23(Field& f) {
  auto eng = spectral_engine(f.chart);
  (void)eng;  // ensure plans exist; we do the masking with explicit ffts below
  const auto st = f.chart.strides();
  const size_t pts = f.points();
  // forward transform along every axis, mask, inverse: reuse engine's plans via
  // derivative trick is not possible, so run a dedicated plan here
  static thread_local std::vector<cplx> buf;
  buf.resize(pts);
  for (int c = 0; c < f.ncomp(); ++c) {
    std::memcpy(buf.data(), f.comp(c), pts * sizeof(cplx));
    fftw_complex* b = reinterpret_cast<fftw_complex*>(buf.data());
    std::vector<int> dims(f.chart.size.begin(), f.chart.size.end());
    fftw_plan fp = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), b, b,
                                 FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_execute(fp);
    fftw_destroy_plan(fp);
    for (size_t p = 0; p < pts; ++p) {
      bool kill = false;
      for (int a = 0; a < f.chart.axes() && !kill; ++a) {
        const int N = f.chart.size[a];
        const int i = static_cast<int>((p / st[a]) % static_cast<size_t>(N));
        const int m = i <= N / 2 ? i : i - N;
        if (std::abs(m) > N / 3) kill = true;
      }
      if (kill) buf[p] = 0.0;
    }
    fftw_plan bp = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), b, b,
                                 FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_execute(bp);
    fftw_destroy_plan(bp);
    const double inv = 1.0 / static_cast<double>(pts);
    cplx* dst = f.comp(c);
    for (size_t p = 0; p < pts; ++p) dst[p] = buf[p] * inv;
  }
}

}  // namespace hcf
