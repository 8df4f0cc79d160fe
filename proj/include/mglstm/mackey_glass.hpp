#pragma once

// Mackey-Glass data generation: delay-equation integration, sampling at unit
// spacing, additive observation noise and min/max scaling.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mglstm {

/// dmu/dt = beta * mu(t - tau) / (1 + mu(t - tau)^exponent) - gamma * mu(t)
struct MgConfig {
    double beta = 0.2;
    double gamma = 0.1;
    double tau = 17.0;
    double exponent = 10.0;
    double history_value = 1.2;  ///< mu(t) for t <= 0
    double dt_int = 0.1;
    double t_end = 1000.0 + 30000.0;
    double transient = 1000.0;

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
    /// Number of unit-spaced samples in [transient, t_end].
    std::size_t sample_count() const;
};

/// Unit-spaced samples of mu(t) after the transient, plus their standard deviation.
struct Trajectory {
    std::vector<double> times;
    std::vector<double> values;
    double nu = 0.0;

    std::size_t size() const { return values.size(); }
    /// Contiguous sub-window; keeps `nu` of the parent window.
    Trajectory segment(std::size_t begin, std::size_t count) const;
};

/// Observations y_n = mu_n + nu * eps_n, eps_n ~ N(0, sigma^2).
struct NoisySeries {
    std::vector<double> values;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::shared_ptr<const Trajectory> source;

    std::size_t size() const { return values.size(); }
    NoisySeries segment(std::size_t begin, std::size_t count) const;
};

/// Affine map of [min, max] onto [-0.5, 0.5].
class Scaler {
public:
    Scaler(double min, double max);

    double min() const { return min_; }
    double max() const { return max_; }
    double span() const { return max_ - min_; }

    double apply(double x) const { return (x - min_) / (max_ - min_) - 0.5; }
    double invert(double u) const { return (u + 0.5) * (max_ - min_) + min_; }

    std::vector<double> apply(std::span<const double> xs) const;
    std::vector<double> invert(std::span<const double> us) const;

private:
    double min_;
    double max_;
};

/// The noise levels of the canonical sweep.
inline const std::vector<double> kCanonicalSigmas{0.0, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64};

/// Fixed-step RK4 integration of the delay equation.
///
/// The delayed state at half steps comes from cubic Hermite interpolation of
/// the stored solution and its derivative; at full steps it is read directly,
/// since tau is a whole number of integrator steps. Throws
/// IntegrationDivergence if the state stops being finite.
Trajectory integrate_mg(const MgConfig& config);

NoisySeries add_noise(std::shared_ptr<const Trajectory> traj, double sigma, std::uint64_t seed);

/// Throws DegenerateScale for constant or empty input.
Scaler fit_scaler(std::span<const double> values);
inline Scaler fit_scaler(const NoisySeries& series) { return fit_scaler(series.values); }

double standard_deviation(std::span<const double> xs);

/// CSV with header `t,mu,y`, preceded by `# key=value` comment lines.
void write_dataset_csv(std::ostream& out, const MgConfig& config, const NoisySeries& series);
void write_dataset_csv(const std::string& path, const MgConfig& config, const NoisySeries& series);

/// Reads a dataset written by write_dataset_csv. The returned series owns a
/// freshly built Trajectory whose `nu` comes from the `# nu=` comment.
NoisySeries read_dataset_csv(const std::string& path);

}  // namespace mglstm
