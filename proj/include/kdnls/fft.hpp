#pragma once

// Thin FFTW wrapper. Raw, unnormalized DFTs in place on std::complex buffers.
// Plans are cached per (size, direction) behind a mutex; execution uses the
// new-array interface, which FFTW documents as thread-safe.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

namespace kdnls::fft {

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    // FFTW_ESTIMATE does not touch the arrays and gives run-to-run identical plans.
    fftw_complex* scratch = fftw_alloc_complex(n);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), scratch, scratch, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    plans_.emplace(key, p);
    return p;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& kv : plans_) fftw_destroy_plan(kv.second);
  }
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

inline void execute(std::complex<double>* data, std::size_t n, int sign) {
  fftw_plan p = PlanCache::instance().get(n, sign);
  auto* z = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(p, z, z);
}

}  // namespace detail

/// X_k = sum_j x_j e^{-2 pi i jk/n}
inline void forward(std::complex<double>* data, std::size_t n) {
  detail::execute(data, n, FFTW_FORWARD);
}
/// x_j = sum_k X_k e^{+2 pi i jk/n}, no 1/n factor.
inline void backward(std::complex<double>* data, std::size_t n) {
  detail::execute(data, n, FFTW_BACKWARD);
}

inline void forward(std::vector<std::complex<double>>& v) { forward(v.data(), v.size()); }
inline void backward(std::vector<std::complex<double>>& v) { backward(v.data(), v.size()); }

}  // namespace kdnls::fft
