#include "picore/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace picore::fft {

namespace {

// FFTW planning is not thread safe; execution on distinct arrays is.
// Plans are created with FFTW_UNALIGNED so they can run on any buffer.
class PlanCache {
  public:
    fftw_plan get(int n0, int n1, int sign) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_tuple(n0, n1, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;

        std::vector<fftw_complex> dummy(static_cast<size_t>(n0) * (n1 > 0 ? n1 : 1));
        fftw_plan plan;
        unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        if (n1 > 0) {
            plan = fftw_plan_dft_2d(n0, n1, dummy.data(), dummy.data(),
                                    sign == kForward ? FFTW_FORWARD : FFTW_BACKWARD, flags);
        } else {
            plan = fftw_plan_dft_1d(n0, dummy.data(), dummy.data(),
                                    sign == kForward ? FFTW_FORWARD : FFTW_BACKWARD, flags);
        }
        plans_[key] = plan;
        return plan;
    }

  private:
    std::mutex mutex_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

void execute(fftw_plan plan, const std::complex<double>* in, std::complex<double>* out) {
    // fftw_execute_dft does not modify the input for out-of-place c2c.
    fftw_execute_dft(plan,
                     reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

}  // namespace

void transform_1d(const std::complex<double>* in, std::complex<double>* out, int n, int sign) {
    execute(cache().get(n, 0, sign), in, out);
}

void transform_2d(const std::complex<double>* in, std::complex<double>* out,
                  int n0, int n1, int sign) {
    execute(cache().get(n0, n1, sign), in, out);
}

std::vector<std::complex<double>> forward_real_1d(const double* in, int n) {
    std::vector<std::complex<double>> buf(n);
    for (int i = 0; i < n; ++i) buf[i] = in[i];
    transform_1d(buf.data(), buf.data(), n, kForward);
    return buf;
}

std::vector<std::complex<double>> forward_real_2d(const double* in, int n0, int n1) {
    std::vector<std::complex<double>> buf(static_cast<size_t>(n0) * n1);
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = in[i];
    transform_2d(buf.data(), buf.data(), n0, n1, kForward);
    return buf;
}

std::vector<double> inverse_to_real_1d(const std::complex<double>* spectrum, int n) {
    std::vector<std::complex<double>> buf(spectrum, spectrum + n);
    transform_1d(buf.data(), buf.data(), n, kBackward);
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = buf[i].real() / n;
    return out;
}

std::vector<double> inverse_to_real_2d(const std::complex<double>* spectrum, int n0, int n1) {
    size_t total = static_cast<size_t>(n0) * n1;
    std::vector<std::complex<double>> buf(spectrum, spectrum + total);
    transform_2d(buf.data(), buf.data(), n0, n1, kBackward);
    std::vector<double> out(total);
    for (size_t i = 0; i < total; ++i) out[i] = buf[i].real() / static_cast<double>(total);
    return out;
}

}  // namespace picore::fft
