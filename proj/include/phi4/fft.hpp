#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace phi4::detail {

// Cached FFTW plans for square c2c 2-D transforms. Plan creation is
// serialized (FFTW requirement); execution through fftw_execute_dft is
// thread safe. Plans are created with FFTW_UNALIGNED so they can run on
// arbitrary caller buffers.
class FftCache {
public:
    static FftCache& instance() {
        static FftCache c;
        return c;
    }

    void transform(std::complex<double>* data, int n, int sign) {
        fftw_plan plan;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto key = std::make_pair(n, sign);
            auto it = plans_.find(key);
            if (it == plans_.end()) {
                std::vector<std::complex<double>> tmp(static_cast<size_t>(n) * n);
                fftw_complex* buf = reinterpret_cast<fftw_complex*>(tmp.data());
                plan = fftw_plan_dft_2d(n, n, buf, buf, sign,
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
                plans_.emplace(key, plan);
            } else {
                plan = it->second;
            }
        }
        fftw_complex* buf = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(plan, buf, buf);
    }

    FftCache(const FftCache&) = delete;
    FftCache& operator=(const FftCache&) = delete;

private:
    FftCache() = default;
    ~FftCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    std::mutex mutex_;
    std::map<std::pair<int, int>, fftw_plan> plans_;
};

// In-place unnormalized 2-D FFT on an n x n row-major complex array.
// sign = FFTW_FORWARD (-1) or FFTW_BACKWARD (+1).
inline void fft2(std::complex<double>* data, int n, int sign) {
    FftCache::instance().transform(data, n, sign);
}

}  // namespace phi4::detail
