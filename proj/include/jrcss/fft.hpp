#pragma once

// Thin FFTW wrapper. Plans are cached per (size, direction, placement,
// alignment); planning is serialized because the FFTW planner is not
// thread-safe, execution is not.

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace jrcss::fft {

using cplx = std::complex<double>;

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int n, int sign, cplx* in, cplx* out) {
    auto* fin = reinterpret_cast<fftw_complex*>(in);
    auto* fout = reinterpret_cast<fftw_complex*>(out);
    const Key key{n, sign, in == out, fftw_alignment_of(reinterpret_cast<double*>(in)),
                  fftw_alignment_of(reinterpret_cast<double*>(out))};
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    // FFTW_ESTIMATE never touches the arrays while planning.
    fftw_plan plan = fftw_plan_dft_1d(n, fin, fout, sign, FFTW_ESTIMATE);
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  using Key = std::tuple<int, int, bool, int, int>;
  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

}  // namespace detail

/// Unnormalized forward DFT, X[k] = sum x[n] exp(-j 2 pi k n / N), in place.
inline void forward(std::vector<cplx>& data) {
  if (data.size() < 2) return;
  auto plan = detail::PlanCache::instance().get(static_cast<int>(data.size()), FFTW_FORWARD,
                                                data.data(), data.data());
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

/// Normalized inverse DFT (includes the 1/N factor), in place.
inline void inverse(std::vector<cplx>& data) {
  if (data.size() < 2) return;
  auto plan = detail::PlanCache::instance().get(static_cast<int>(data.size()), FFTW_BACKWARD,
                                                data.data(), data.data());
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
  const double scale = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v *= scale;
}

}  // namespace jrcss::fft
