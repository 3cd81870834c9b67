#include <optolink/fft.hpp>

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <tuple>

namespace optolink::fft {
namespace {

enum class Kind { forward, backward, r2c, c2r };

class PlanCache {
public:
    ~PlanCache()
    {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(Kind kind, std::size_t n)
    {
        std::lock_guard lock(mutex_);
        auto key = std::make_tuple(kind, n);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;

        const int len = static_cast<int>(n);
        constexpr unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        auto* cin = fftw_alloc_complex(n);
        auto* cout = fftw_alloc_complex(n);
        auto* rbuf = fftw_alloc_real(n);
        fftw_plan plan = nullptr;
        switch (kind) {
        case Kind::forward: plan = fftw_plan_dft_1d(len, cin, cout, FFTW_FORWARD, flags); break;
        case Kind::backward: plan = fftw_plan_dft_1d(len, cin, cout, FFTW_BACKWARD, flags); break;
        case Kind::r2c: plan = fftw_plan_dft_r2c_1d(len, rbuf, cout, flags); break;
        case Kind::c2r: plan = fftw_plan_dft_c2r_1d(len, cin, rbuf, flags); break;
        }
        fftw_free(cin);
        fftw_free(cout);
        fftw_free(rbuf);
        if (plan == nullptr) throw std::runtime_error("fftw: failed to create plan");
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::tuple<Kind, std::size_t>, fftw_plan> plans_;
};

PlanCache& cache()
{
    static PlanCache instance;
    return instance;
}

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

void require_nonempty(std::size_t n)
{
    if (n == 0) throw ParameterError("fft: empty input");
}

} // namespace

std::vector<Complex> forward(std::span<const Complex> x)
{
    require_nonempty(x.size());
    std::vector<Complex> in(x.begin(), x.end());
    std::vector<Complex> out(x.size());
    fftw_execute_dft(cache().get(Kind::forward, x.size()), as_fftw(in.data()), as_fftw(out.data()));
    return out;
}

std::vector<Complex> inverse(std::span<const Complex> spectrum)
{
    require_nonempty(spectrum.size());
    std::vector<Complex> in(spectrum.begin(), spectrum.end());
    std::vector<Complex> out(spectrum.size());
    fftw_execute_dft(cache().get(Kind::backward, spectrum.size()), as_fftw(in.data()),
                     as_fftw(out.data()));
    const double scale = 1.0 / static_cast<double>(spectrum.size());
    for (auto& v : out) v *= scale;
    return out;
}

std::vector<Complex> forward_real(std::span<const double> x)
{
    require_nonempty(x.size());
    std::vector<double> in(x.begin(), x.end());
    std::vector<Complex> out(x.size() / 2 + 1);
    fftw_execute_dft_r2c(cache().get(Kind::r2c, x.size()), in.data(), as_fftw(out.data()));
    return out;
}

std::vector<double> inverse_real(std::span<const Complex> half_spectrum, std::size_t n)
{
    require_nonempty(n);
    if (half_spectrum.size() != n / 2 + 1) {
        throw ParameterError("fft::inverse_real: spectrum size does not match n/2+1");
    }
    // c2r overwrites its input.
    std::vector<Complex> in(half_spectrum.begin(), half_spectrum.end());
    std::vector<double> out(n);
    fftw_execute_dft_c2r(cache().get(Kind::c2r, n), as_fftw(in.data()), out.data());
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : out) v *= scale;
    return out;
}

} // namespace optolink::fft
