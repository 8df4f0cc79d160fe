#include "mglstm/mackey_glass.hpp"

#include "mglstm/error.hpp"
#include "mglstm/rng.hpp"
#include "mglstm/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

namespace mglstm {

namespace {

bool is_whole(double x, double tol = 1e-9)
{
    return std::abs(x - std::round(x)) <= tol * std::max(1.0, std::abs(x));
}

}  // namespace

void MgConfig::validate() const
{
    if (!(tau > 0)) throw ConfigError("mg.tau must be positive");
    if (!(dt_int > 0)) throw ConfigError("mg.dt_int must be positive");
    const double delay_steps = tau / dt_int;
    if (!is_whole(delay_steps) || std::round(delay_steps) < 10)
        throw ConfigError("mg.tau / mg.dt_int must be an integer >= 10");
    if (!is_whole(1.0 / dt_int))
        throw ConfigError("mg.dt_int must divide the unit sampling interval");
    if (!is_whole(transient) || transient < 0)
        throw ConfigError("mg.transient must be a non-negative whole number of time units");
    if (!(t_end > transient)) throw ConfigError("mg.t_end must exceed mg.transient");
}

std::size_t MgConfig::sample_count() const
{
    return static_cast<std::size_t>(std::floor(t_end - transient + 1e-9)) + 1;
}

Trajectory Trajectory::segment(std::size_t begin, std::size_t count) const
{
    if (begin + count > size()) throw LengthMismatch("trajectory segment out of range");
    Trajectory out;
    out.times.assign(times.begin() + begin, times.begin() + begin + count);
    out.values.assign(values.begin() + begin, values.begin() + begin + count);
    out.nu = nu;
    return out;
}

NoisySeries NoisySeries::segment(std::size_t begin, std::size_t count) const
{
    if (begin + count > size()) throw LengthMismatch("series segment out of range");
    NoisySeries out;
    out.values.assign(values.begin() + begin, values.begin() + begin + count);
    out.sigma = sigma;
    out.seed = seed;
    if (source) out.source = std::make_shared<const Trajectory>(source->segment(begin, count));
    return out;
}

Scaler::Scaler(double min, double max) : min_(min), max_(max)
{
    if (!(max > min) || !std::isfinite(min) || !std::isfinite(max))
        throw DegenerateScale("scaler requires finite max > min");
}

std::vector<double> Scaler::apply(std::span<const double> xs) const
{
    std::vector<double> out(xs.size());
    std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return apply(x); });
    return out;
}

std::vector<double> Scaler::invert(std::span<const double> us) const
{
    std::vector<double> out(us.size());
    std::transform(us.begin(), us.end(), out.begin(), [this](double u) { return invert(u); });
    return out;
}

Trajectory integrate_mg(const MgConfig& config)
{
    config.validate();
    const double h = config.dt_int;
    const auto delay = static_cast<long>(std::llround(config.tau / h));
    const auto per_unit = static_cast<long>(std::llround(1.0 / h));
    const auto first_sample = static_cast<long>(std::llround(config.transient)) * per_unit;
    const auto n_samples = static_cast<long>(config.sample_count());
    const long n_steps = first_sample + (n_samples - 1) * per_unit;

    auto rhs = [&](double mu, double mu_delayed) {
        return config.beta * mu_delayed / (1.0 + std::pow(mu_delayed, config.exponent)) - config.gamma * mu;
    };

    // mu[k] = mu(k h); slope[k] is the right derivative at k h.
    std::vector<double> mu(n_steps + 1);
    std::vector<double> slope(n_steps + 1);
    mu[0] = config.history_value;
    const double history = config.history_value;

    auto value_at = [&](long k) { return k <= 0 ? history : mu[k]; };
    auto midpoint_at = [&](long j) {  // mu((j + 1/2) h)
        if (j + 1 <= 0) return history;
        return 0.5 * (mu[j] + mu[j + 1]) + 0.125 * h * (slope[j] - slope[j + 1]);
    };

    for (long n = 0; n < n_steps; ++n) {
        const long j = n - delay;
        const double d0 = value_at(j);
        const double d_half = midpoint_at(j);
        const double d1 = value_at(j + 1);
        const double y = mu[n];
        const double k1 = rhs(y, d0);
        slope[n] = k1;
        const double k2 = rhs(y + 0.5 * h * k1, d_half);
        const double k3 = rhs(y + 0.5 * h * k2, d_half);
        const double k4 = rhs(y + h * k3, d1);
        mu[n + 1] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(mu[n + 1]))
            throw IntegrationDivergence("non-finite state at t=" + format_double((n + 1) * h) +
                                        "; reduce mg.dt_int");
    }

    Trajectory out;
    out.times.resize(n_samples);
    out.values.resize(n_samples);
    for (long k = 0; k < n_samples; ++k) {
        out.times[k] = config.transient + static_cast<double>(k);
        out.values[k] = mu[first_sample + k * per_unit];
    }
    out.nu = standard_deviation(out.values);
    return out;
}

NoisySeries add_noise(std::shared_ptr<const Trajectory> traj, double sigma, std::uint64_t seed)
{
    if (!(sigma >= 0)) throw ConfigError("noise level must be non-negative");
    NoisySeries out;
    out.sigma = sigma;
    out.seed = seed;
    out.values = traj->values;
    if (sigma > 0) {
        const rng::Stream stream(seed);
        for (std::size_t n = 0; n < out.values.size(); ++n)
            out.values[n] += traj->nu * sigma * stream.normal(n);
    }
    out.source = std::move(traj);
    return out;
}

Scaler fit_scaler(std::span<const double> values)
{
    if (values.empty()) throw DegenerateScale("cannot fit a scaler to an empty series");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (!(*hi > *lo)) throw DegenerateScale("cannot fit a scaler to a constant series");
    return Scaler(*lo, *hi);
}

double standard_deviation(std::span<const double> xs)
{
    if (xs.empty()) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

void write_dataset_csv(std::ostream& out, const MgConfig& c, const NoisySeries& series)
{
    const Trajectory& traj = *series.source;
    out << "# beta=" << format_double(c.beta) << '\n'
        << "# gamma=" << format_double(c.gamma) << '\n'
        << "# tau=" << format_double(c.tau) << '\n'
        << "# exponent=" << format_double(c.exponent) << '\n'
        << "# history_value=" << format_double(c.history_value) << '\n'
        << "# dt_int=" << format_double(c.dt_int) << '\n'
        << "# t_end=" << format_double(c.t_end) << '\n'
        << "# transient=" << format_double(c.transient) << '\n'
        << "# nu=" << format_double(traj.nu) << '\n'
        << "# sigma=" << format_double(series.sigma) << '\n'
        << "# seed=" << series.seed << '\n'
        << "t,mu,y\n";
    for (std::size_t n = 0; n < series.size(); ++n)
        out << format_double(traj.times[n]) << ',' << format_double(traj.values[n]) << ','
            << format_double(series.values[n]) << '\n';
}

void write_dataset_csv(const std::string& path, const MgConfig& config, const NoisySeries& series)
{
    std::ofstream out(path);
    if (!out) throw MissingArtifact("cannot open for writing: " + path);
    write_dataset_csv(out, config, series);
    if (!out) throw FormatError("write failed: " + path);
}

NoisySeries read_dataset_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw MissingArtifact("dataset not found: " + path);
    auto traj = std::make_shared<Trajectory>();
    NoisySeries series;
    bool have_nu = false;
    bool have_header = false;
    std::string line;
    while (std::getline(in, line)) {
        const auto text = trim(line);
        if (text.empty()) continue;
        if (text.front() == '#') {
            const auto body = trim(text.substr(1));
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) continue;
            const auto key = trim(body.substr(0, eq));
            const auto value = trim(body.substr(eq + 1));
            if (key == "nu") {
                traj->nu = parse_double(value);
                have_nu = true;
            } else if (key == "sigma") {
                series.sigma = parse_double(value);
            } else if (key == "seed") {
                series.seed = std::stoull(std::string(value));
            }
            continue;
        }
        if (!have_header) {
            if (text != "t,mu,y") throw FormatError(path + ": expected header 't,mu,y'");
            have_header = true;
            continue;
        }
        const auto cols = split(text, ',');
        if (cols.size() != 3) throw FormatError(path + ": expected 3 columns: " + std::string(text));
        traj->times.push_back(parse_double(cols[0]));
        traj->values.push_back(parse_double(cols[1]));
        series.values.push_back(parse_double(cols[2]));
    }
    if (!have_header) throw FormatError(path + ": missing header");
    if (!have_nu) traj->nu = standard_deviation(traj->values);
    series.source = std::move(traj);
    return series;
}

}  // namespace mglstm
