#ifndef MAAT_COMMON_HPP
#define MAAT_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace maat {

inline constexpr const char* kVersion = "0.1.0";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Error taxonomy; the CLI maps each kind to a distinct exit code.
enum class ErrorKind {
    invalid_input,     // bad shapes, empty grids, non-increasing times
    invalid_parameter, // out-of-range scalar parameter (e.g. sigma <= 0)
    config,            // unusable run configuration
    missing_file,
    malformed_file,
    numeric, // non-finite intermediates, divergence, blowup
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

struct InvalidInputError : Error {
    explicit InvalidInputError(const std::string& w) : Error(ErrorKind::invalid_input, w) {}
};
struct InvalidParameterError : Error {
    explicit InvalidParameterError(const std::string& w) : Error(ErrorKind::invalid_parameter, w) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};
/// Integration produced a non-finite state; carries the offending step.
struct IntegrationBlowupError : NumericError {
    IntegrationBlowupError(const std::string& w, long step) : NumericError(w), step_index(step) {}
    long step_index;
};

/// Deterministic RNG with portable draw algorithms. The standard
/// distributions are implementation-defined, so normal/uniform/Student-t
/// draws are generated here from raw mt19937_64 output and produce the
/// same stream on every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Derive an independent, reproducible stream for a sub-purpose.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        return Rng(splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1))));
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    /// Student-t with integer degrees of freedom nu (> 0), unit scale.
    double student_t(int nu) {
        double chi2 = 0.0;
        for (int i = 0; i < nu; ++i) {
            const double z = normal();
            chi2 += z * z;
        }
        return normal() * std::sqrt(static_cast<double>(nu) / chi2);
    }

    std::uint64_t raw() { return engine_(); }

  private:
    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace maat

#endif
