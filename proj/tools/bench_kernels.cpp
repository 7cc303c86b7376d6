// Timings for the serial reference kernels against the OpenMP kernels, with
// a bitwise equality check before each measurement.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "clft/common.hpp"
#include "clft/kernels.hpp"

using namespace clft;

namespace {

double time_ms(const std::function<void()>& fn, int iters) {
  fn();  // warm
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iters; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

void report(const char* name, double serial_ms, double par_ms, bool equal) {
  std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   %s\n", name, serial_ms, par_ms,
              serial_ms / par_ms, equal ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
  init_threads_from_env();
  std::printf("threads: %d\n", worker_threads());
  Rng rng(7);

  {
    const int64_t m = 577, k = 768, n = 768;
    std::vector<double> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(k * n));
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = rng.normal();
    std::vector<double> cs(static_cast<size_t>(m * n)), cp(static_cast<size_t>(m * n));
    kernels::serial::matmul_nn(a.data(), b.data(), cs.data(), m, k, n, false);
    kernels::par::matmul_nn(a.data(), b.data(), cp.data(), m, k, n, false);
    const bool eq = bitwise_equal(cs, cp);
    const double ts = time_ms([&] { kernels::serial::matmul_nn(a.data(), b.data(), cs.data(), m, k, n, false); }, 3);
    const double tp = time_ms([&] { kernels::par::matmul_nn(a.data(), b.data(), cp.data(), m, k, n, false); }, 3);
    report("matmul 577x768x768", ts, tp, eq);
  }

  {
    kernels::ConvDims d;
    d.c = 256;
    d.h = d.w = 24;
    d.oc = 256;
    d.kh = d.kw = 3;
    d.stride = 1;
    d.pad = 1;
    d.oh = d.ow = 24;
    std::vector<double> x(static_cast<size_t>(d.c * d.h * d.w)), w(static_cast<size_t>(d.oc * d.c * 9));
    for (double& v : x) v = rng.normal();
    for (double& v : w) v = rng.normal() * 0.05;
    std::vector<double> ys(static_cast<size_t>(d.oc * d.oh * d.ow)), yp(ys.size());
    kernels::serial::conv2d_fwd(x.data(), w.data(), nullptr, ys.data(), d);
    kernels::par::conv2d_fwd(x.data(), w.data(), nullptr, yp.data(), d);
    const bool eq = bitwise_equal(ys, yp);
    const double ts = time_ms([&] { kernels::serial::conv2d_fwd(x.data(), w.data(), nullptr, ys.data(), d); }, 3);
    const double tp = time_ms([&] { kernels::par::conv2d_fwd(x.data(), w.data(), nullptr, yp.data(), d); }, 3);
    report("conv2d 3x3 256ch 24x24", ts, tp, eq);
  }

  {
    kernels::ConvDims d;
    d.c = 256;
    d.h = d.w = 24;
    d.oc = 256;
    d.kh = d.kw = 2;
    d.stride = 2;
    d.pad = 0;
    d.oh = d.ow = 48;
    std::vector<double> x(static_cast<size_t>(d.c * d.h * d.w)), w(static_cast<size_t>(d.c * d.oc * 4));
    for (double& v : x) v = rng.normal();
    for (double& v : w) v = rng.normal() * 0.05;
    std::vector<double> ys(static_cast<size_t>(d.oc * d.oh * d.ow)), yp(ys.size());
    kernels::serial::tconv2d_fwd(x.data(), w.data(), nullptr, ys.data(), d);
    kernels::par::tconv2d_fwd(x.data(), w.data(), nullptr, yp.data(), d);
    const bool eq = bitwise_equal(ys, yp);
    const double ts = time_ms([&] { kernels::serial::tconv2d_fwd(x.data(), w.data(), nullptr, ys.data(), d); }, 3);
    const double tp = time_ms([&] { kernels::par::tconv2d_fwd(x.data(), w.data(), nullptr, yp.data(), d); }, 3);
    report("tconv2d 2x2 s2 256ch", ts, tp, eq);
  }

  {
    const int64_t n = 1 << 21;
    std::vector<double> x(static_cast<size_t>(n)), ys(static_cast<size_t>(n)), yp(static_cast<size_t>(n));
    for (double& v : x) v = rng.normal();
    kernels::serial::gelu_fwd(x.data(), ys.data(), n);
    kernels::par::gelu_fwd(x.data(), yp.data(), n);
    const bool eq = bitwise_equal(ys, yp);
    const double ts = time_ms([&] { kernels::serial::gelu_fwd(x.data(), ys.data(), n); }, 5);
    const double tp = time_ms([&] { kernels::par::gelu_fwd(x.data(), yp.data(), n); }, 5);
    report("gelu 2M elements", ts, tp, eq);
  }

  return 0;
}
