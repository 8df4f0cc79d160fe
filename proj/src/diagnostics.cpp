#include "mglstm/diagnostics.hpp"

#include "mglstm/error.hpp"
#include "mglstm/rng.hpp"
#include "mglstm/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace mglstm {

std::vector<double> predict_normalized(const LstmParams& params, std::span<const double> inputs,
                                       const CaptureFlags& capture, std::vector<StepTrace>* traces,
                                       std::vector<LstmState>* states)
{
    std::vector<double> preds;
    preds.reserve(inputs.size());
    LstmState state = init_state(params.n_cells());
    for (double y : inputs) {
        StepResult r = step(params, state, y);
        preds.push_back(r.y_hat);
        if (capture.traces && traces) traces->push_back(std::move(r.trace));
        state = std::move(r.next);
        if (capture.states && states) states->push_back(state);
    }
    return preds;
}

PredictionRun sequential_predict(const Model& model, std::span<const double> observations,
                                 std::span<const double> truth, const CaptureFlags& capture)
{
    if (!truth.empty() && truth.size() != observations.size())
        throw LengthMismatch("sequential_predict: truth and observations differ in length");
    PredictionRun run;
    run.inputs.assign(observations.begin(), observations.end());
    run.truth.assign(truth.begin(), truth.end());
    const double lo = model.scaler.min() - 3.0 * model.nu;
    const double hi = model.scaler.max() + 3.0 * model.nu;
    run.scaler_warning = std::any_of(observations.begin(), observations.end(),
                                     [&](double y) { return y < lo || y > hi; });
    const std::vector<double> x = model.scaler.apply(observations);
    const std::vector<double> p = predict_normalized(model.params, x, capture, &run.traces, &run.states);
    run.preds = model.scaler.invert(p);
    return run;
}

double nrmse(std::span<const double> preds, std::span<const double> truth, double nu)
{
    if (preds.size() != truth.size())
        throw LengthMismatch("nrmse: " + std::to_string(preds.size()) + " predictions vs " +
                             std::to_string(truth.size()) + " truth values");
    if (!(nu > 0)) throw ConfigError("nrmse: nu must be positive");
    if (preds.empty()) throw LengthMismatch("nrmse: empty input");
    double ss = 0.0;
    for (std::size_t t = 0; t < preds.size(); ++t) ss += (truth[t] - preds[t]) * (truth[t] - preds[t]);
    return std::sqrt(ss / static_cast<double>(preds.size())) / nu;
}

double one_step_nrmse(const PredictionRun& run, double nu, std::size_t washout)
{
    if (run.truth.size() != run.preds.size()) throw LengthMismatch("one_step_nrmse: run has no aligned truth");
    if (run.preds.size() < washout + 2) throw LengthMismatch("one_step_nrmse: run shorter than washout");
    const std::size_t count = run.preds.size() - 1 - washout;
    return nrmse(std::span(run.preds).subspan(washout, count), std::span(run.truth).subspan(washout + 1, count), nu);
}

std::vector<double> zeroth_order(std::span<const double> observations)
{
    if (observations.size() < 2) throw LengthMismatch("zeroth_order: need at least two observations");
    return {observations.begin(), observations.end() - 1};
}

double zeroth_order_nrmse(std::span<const double> observations, std::span<const double> truth, double nu,
                          std::size_t washout)
{
    if (truth.size() != observations.size()) throw LengthMismatch("zeroth_order_nrmse: length mismatch");
    const std::vector<double> preds = zeroth_order(observations);
    if (preds.size() <= washout) throw LengthMismatch("zeroth_order_nrmse: series shorter than washout");
    return nrmse(std::span(preds).subspan(washout), truth.subspan(washout + 1), nu);
}

AlphaResult contribution_alpha(std::span<const StepTrace> traces)
{
    AlphaResult out;
    double total = 0.0;
    out.per_step.reserve(traces.size());
    for (const StepTrace& tr : traces) {
        if (tr.wh_h.size() != tr.wy_y.size()) throw ParameterShapeError("trace vectors differ in length");
        double step_total = 0.0;
        std::size_t step_terms = 0;
        for (Eigen::Index i = 0; i < tr.wh_h.size(); ++i) {
            const double rec = std::abs(tr.wh_h[i]);
            const double denom = std::abs(tr.wy_y[i]) + rec;
            if (denom == 0.0) {
                ++out.skipped;
                continue;
            }
            step_total += rec / denom;
            ++step_terms;
        }
        total += step_total;
        out.terms += step_terms;
        out.per_step.push_back(step_terms ? step_total / static_cast<double>(step_terms)
                                          : std::numeric_limits<double>::quiet_NaN());
    }
    if (out.terms == 0) throw UndefinedAlpha("every contribution term has a zero denominator");
    out.alpha = total / static_cast<double>(out.terms);
    if (out.alpha >= 1.0) {
        out.ratio = std::numeric_limits<double>::infinity();
        out.ratio_overflow = true;
    } else {
        out.ratio = out.alpha / (1.0 - out.alpha);
    }
    return out;
}

AlphaResult contribution_alpha(const PredictionRun& run, std::size_t washout)
{
    if (run.traces.empty()) throw UndefinedAlpha("prediction run has no captured traces");
    if (washout >= run.traces.size()) throw LengthMismatch("contribution_alpha: washout covers the whole run");
    return contribution_alpha(std::span(run.traces).subspan(washout));
}

double relaxation_timescale(std::span<const double> profile, double e_mu, double dt)
{
    if (profile.empty()) throw LengthMismatch("relaxation_timescale: empty profile");
    const double e_0 = profile.front();
    if (!(e_0 > e_mu))
        throw DegenerateRelaxation("initial deviation " + format_double(e_0) + " does not exceed baseline " +
                                   format_double(e_mu) + "; the impulse had no measurable effect");
    double sum = 0.0;
    for (double e : profile) sum += (e - e_mu) / (e_0 - e_mu);
    return sum * dt;
}

std::size_t impulse_required_length(const ImpulseSettings& s)
{
    return static_cast<std::size_t>(s.n_ensembles + 1) * static_cast<std::size_t>(s.period) + 1;
}

ImpulseResult impulse_experiment(const Model& model, const Trajectory& clean, const ImpulseSettings& s)
{
    if (s.period < 1) throw ConfigError("impulse.period must be >= 1");
    if (s.n_ensembles < 1) throw ConfigError("impulse.n_ensembles must be >= 1");
    const std::size_t needed = impulse_required_length(s);
    if (clean.size() < needed)
        throw LengthMismatch("impulse experiment needs " + std::to_string(needed) + " clean samples, got " +
                             std::to_string(clean.size()));
    const auto period = static_cast<std::size_t>(s.period);
    const std::size_t n_inputs = needed - 1;
    const double nu = clean.nu;

    const std::span<const double> mu(clean.values.data(), needed);
    std::vector<double> x = model.scaler.apply(mu.first(n_inputs));
    const std::vector<double> base = model.scaler.invert(predict_normalized(model.params, x));
    for (std::size_t k = 1; k <= static_cast<std::size_t>(s.n_ensembles); ++k) x[k * period] += s.magnitude;
    const std::vector<double> kicked = model.scaler.invert(predict_normalized(model.params, x));

    ImpulseResult out;
    out.n_ensembles = s.n_ensembles;
    out.e_n.assign(period, 0.0);
    double base_ss = 0.0;
    double shift_at_kick = 0.0;
    for (std::size_t k = 1; k <= static_cast<std::size_t>(s.n_ensembles); ++k) {
        for (std::size_t n = 0; n < period; ++n) {
            const std::size_t t = k * period + n;
            const double err = mu[t + 1] - kicked[t];
            const double base_err = mu[t + 1] - base[t];
            out.e_n[n] += err * err;
            base_ss += base_err * base_err;
            if (n == 0) shift_at_kick = std::max(shift_at_kick, std::abs(kicked[t] - base[t]));
        }
    }
    for (double& e : out.e_n) e = std::sqrt(e / s.n_ensembles) / nu;
    out.e_mu_baseline = std::sqrt(base_ss / static_cast<double>(s.n_ensembles * period)) / nu;
    out.e_0 = out.e_n.front();
    out.e_0_impulse = out.e_0 * nu / (s.magnitude * model.scaler.span());
    if (shift_at_kick <= 1e-12 * nu)
        throw DegenerateRelaxation("the impulse does not change the prediction; the model ignores its input");
    out.lambda = relaxation_timescale(out.e_n, out.e_mu_baseline);
    return out;
}

std::uint64_t sweep_seed(std::uint64_t global_seed, double train_sigma, double eval_sigma)
{
    return rng::derive_seed(global_seed, "sweep/" + format_tag(train_sigma), eval_sigma);
}

SweepTable noise_sweep(std::span<const Model> models, const Trajectory& clean, std::span<const double> eval_sigmas,
                       std::uint64_t global_seed, std::size_t washout)
{
    SweepTable table;
    table.eval_sigmas.assign(eval_sigmas.begin(), eval_sigmas.end());
    auto source = std::make_shared<const Trajectory>(clean);
    for (double sigma : eval_sigmas) {
        const NoisySeries noisy = add_noise(source, sigma, rng::derive_seed(global_seed, "sweep/zeroth", sigma));
        table.zeroth_order.push_back(zeroth_order_nrmse(noisy.values, clean.values, clean.nu, washout));
    }
    for (const Model& model : models) {
        table.train_sigmas.push_back(model.train_sigma);
        auto& row = table.e_mu.emplace_back();
        for (double sigma : eval_sigmas) {
            const NoisySeries noisy = add_noise(source, sigma, sweep_seed(global_seed, model.train_sigma, sigma));
            const PredictionRun run = sequential_predict(model, noisy.values, clean.values);
            row.push_back(one_step_nrmse(run, clean.nu, washout));
        }
    }
    return table;
}

}  // namespace mglstm
