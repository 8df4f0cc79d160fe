#include "mglstm/training.hpp"

#include "mglstm/rng.hpp"

#include <cmath>

namespace mglstm {

void TrainConfig::validate() const
{
    if (n_cells < 1) throw ConfigError("train.n_cells must be >= 1");
    if (seq_len < 1) throw ConfigError("train.seq_len must be >= 1");
    if (n_epochs < 1) throw ConfigError("train.n_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be positive");
    if (!(adam_beta1 > 0 && adam_beta1 < 1)) throw ConfigError("train.adam_beta1 must lie in (0, 1)");
    if (!(adam_beta2 > 0 && adam_beta2 < 1)) throw ConfigError("train.adam_beta2 must lie in (0, 1)");
    if (!(adam_epsilon > 0)) throw ConfigError("train.adam_epsilon must be positive");
    if (!(grad_clip > 0)) throw ConfigError("train.grad_clip must be positive");
    if (!(init_scale >= 0)) throw ConfigError("train.init_scale must be non-negative");
}

double TrainConfig::effective_init_scale() const
{
    return init_scale > 0 ? init_scale : 1.0 / std::sqrt(static_cast<double>(n_cells));
}

Gradients Gradients::zeros_like(const ParamTensors& params)
{
    Gradients g;
    g.set_zero(params.n_cells());
    return g;
}

Gradients& Gradients::operator+=(const Gradients& other)
{
    auto mine = tensors();
    const auto theirs = other.tensors();
    for (std::size_t k = 0; k < kCount; ++k) *mine[k] += *theirs[k];
    return *this;
}

Gradients& Gradients::operator*=(double factor)
{
    for (auto* t : tensors()) *t *= factor;
    return *this;
}

double Gradients::global_norm() const
{
    double ss = 0.0;
    for (const auto* t : tensors()) ss += t->squaredNorm();
    return std::sqrt(ss);
}

AdamMoments AdamMoments::zeros_like(const ParamTensors& params)
{
    AdamMoments a;
    a.m.set_zero(params.n_cells());
    a.v.set_zero(params.n_cells());
    return a;
}

double loss(std::span<const double> preds, std::span<const double> targets)
{
    if (preds.size() != targets.size())
        throw LengthMismatch("loss: " + std::to_string(preds.size()) + " predictions vs " +
                             std::to_string(targets.size()) + " targets");
    double total = 0.0;
    for (std::size_t t = 0; t < preds.size(); ++t) {
        const double r = preds[t] - targets[t];
        total += 0.5 * r * r;
    }
    return total;
}

BpttResult bptt(const LstmParams& p, const LstmState& initial_state, std::span<const double> inputs,
                std::span<const double> targets)
{
    if (inputs.size() != targets.size())
        throw LengthMismatch("bptt: " + std::to_string(inputs.size()) + " inputs vs " +
                             std::to_string(targets.size()) + " targets");
    const std::size_t steps = inputs.size();
    BpttResult out{0.0, Gradients::zeros_like(p)};
    if (steps == 0) return out;

    // states[t] is the state fed into step t.
    std::vector<LstmState> states;
    std::vector<StepTrace> traces;
    std::vector<double> residual(steps);
    states.reserve(steps + 1);
    traces.reserve(steps);
    states.push_back(initial_state);
    for (std::size_t t = 0; t < steps; ++t) {
        StepResult r = step(p, states.back(), inputs[t]);
        residual[t] = r.y_hat - targets[t];
        out.loss += 0.5 * residual[t] * residual[t];
        states.push_back(std::move(r.next));
        traces.push_back(std::move(r.trace));
    }
    if (!std::isfinite(out.loss)) throw DivergenceError("non-finite loss in backpropagation");

    Gradients& g = out.grads;
    const Eigen::Index n = p.n_cells();
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd ds_next = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd d_gate_in(n), d_readout(n), dh(n), ds(n), dz(n);
    Eigen::VectorXd da_i(n), da_o(n), da_f(n), da_s(n);

    for (std::size_t t = steps; t-- > 0;) {
        const StepTrace& tr = traces[t];
        const LstmState& prev = states[t];
        const LstmState& next = states[t + 1];
        const double dy = residual[t];

        // Output network.
        g.w_y2.row(0) += dy * tr.readout.transpose();
        g.b_y2(0, 0) += dy;
        d_readout = (dy * p.w_y2.row(0).transpose()).cwiseProduct((1.0 - tr.readout.array().square()).matrix());
        g.w_y1.noalias() += d_readout * next.h.transpose();
        g.b_y1.col(0) += d_readout;

        // Output state and cell state.
        dh.noalias() = p.w_y1.transpose() * d_readout;
        dh += dh_next;
        da_o = dh.cwiseProduct(tr.cell_tanh).cwiseProduct((tr.gate_o.array() * (1.0 - tr.gate_o.array())).matrix());
        ds = ds_next + dh.cwiseProduct(tr.gate_o).cwiseProduct((1.0 - tr.cell_tanh.array().square()).matrix());

        da_f = ds.cwiseProduct(prev.s).cwiseProduct((tr.gate_f.array() * (1.0 - tr.gate_f.array())).matrix());
        da_i = ds.cwiseProduct(tr.candidate).cwiseProduct((tr.gate_i.array() * (1.0 - tr.gate_i.array())).matrix());
        const Eigen::ArrayXd cand_slope = p.candidate == Candidate::Sigmoid
                                            ? Eigen::ArrayXd(tr.candidate.array() * (1.0 - tr.candidate.array()))
                                            : Eigen::ArrayXd(1.0 - tr.candidate.array().square());
        da_s = (ds.cwiseProduct(tr.gate_i).array() * cand_slope).matrix();

        g.w_i.noalias() += da_i * tr.z.transpose();
        g.w_o.noalias() += da_o * tr.z.transpose();
        g.w_f.noalias() += da_f * tr.z.transpose();
        g.w_s.noalias() += da_s * tr.z.transpose();
        g.b_i.col(0) += da_i;
        g.b_o.col(0) += da_o;
        g.b_f.col(0) += da_f;
        g.b_s.col(0) += da_s;

        // Input network.
        dz.noalias() = p.w_i.transpose() * da_i;
        dz.noalias() += p.w_o.transpose() * da_o;
        dz.noalias() += p.w_f.transpose() * da_f;
        dz.noalias() += p.w_s.transpose() * da_s;
        d_gate_in = dz.cwiseProduct((1.0 - tr.z.array().square()).matrix());
        g.w_h.noalias() += d_gate_in * prev.h.transpose();
        g.w_y.col(0) += d_gate_in * inputs[t];

        dh_next.noalias() = p.w_h.transpose() * d_gate_in;
        ds_next = ds.cwiseProduct(tr.gate_f);
    }
    return out;
}

double clip_global_norm(Gradients& grads, double max_norm)
{
    const double norm = grads.global_norm();
    if (max_norm > 0 && norm > max_norm) grads *= max_norm / norm;
    return norm;
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, long step, const AdamSettings& s)
{
    const double bias1 = 1.0 - std::pow(s.beta1, static_cast<double>(step));
    const double bias2 = 1.0 - std::pow(s.beta2, static_cast<double>(step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * grads[k];
        v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * grads[k] * grads[k];
        const double m_hat = m[k] / bias1;
        const double v_hat = v[k] / bias2;
        params[k] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}

double adam_step(LstmParams& params, const Gradients& grads, AdamMoments& moments, const AdamSettings& settings)
{
    Gradients clipped = grads;
    const double norm = clip_global_norm(clipped, settings.grad_clip);
    ++moments.step_count;
    auto p = params.tensors();
    const auto g = clipped.tensors();
    auto m = moments.m.tensors();
    auto v = moments.v.tensors();
    for (std::size_t k = 0; k < ParamTensors::kCount; ++k) {
        const auto size = static_cast<std::size_t>(p[k]->size());
        adam_update({p[k]->data(), size}, {g[k]->data(), size}, {m[k]->data(), size}, {v[k]->data(), size},
                    moments.step_count, settings);
    }
    return norm;
}

AdamSettings adam_settings(const TrainConfig& c)
{
    return {c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_epsilon, c.grad_clip};
}

LstmParams initialize_params(const TrainConfig& config)
{
    LstmParams p = LstmParams::zeros(config.n_cells, config.candidate);
    const double scale = config.effective_init_scale();
    rng::Generator gen(rng::derive_seed(config.seed, "init", 0.0));
    for (auto* t : p.tensors())
        for (Eigen::Index k = 0; k < t->size(); ++k) t->data()[k] = gen.uniform(-scale, scale);
    p.b_f.setConstant(config.forget_bias);
    return p;
}

namespace {

// One epoch draws (length - 1) / seq_len random windows, grouped into full batches.
struct Schedule {
    long batches_per_epoch;
};

Schedule schedule(const TrainConfig& c, std::size_t length)
{
    if (length < static_cast<std::size_t>(c.seq_len) + 1)
        throw LengthMismatch("training series has " + std::to_string(length) + " samples; need at least seq_len + 1");
    const long windows = std::max(1L, static_cast<long>((length - 1) / c.seq_len));
    return {std::max(1L, windows / c.batch_size)};
}

}  // namespace

long planned_steps(const TrainConfig& config, std::size_t length)
{
    return schedule(config, length).batches_per_epoch * config.n_epochs;
}

TrainResult train(double sigma, const NoisySeries& data, const TrainConfig& config, const TrainHooks& hooks)
{
    config.validate();
    const Schedule plan = schedule(config, data.size());
    const Scaler scaler = fit_scaler(data);
    const std::vector<double> x = scaler.apply(data.values);
    const auto T = static_cast<std::size_t>(config.seq_len);
    const std::uint64_t max_start = x.size() - 1 - T;

    TrainResult result;
    result.model.params = initialize_params(config);
    result.model.scaler = scaler;
    result.model.nu = data.source ? data.source->nu : standard_deviation(data.values);
    result.model.train_sigma = sigma;
    result.model.seed = config.seed;

    Model last_finite = result.model;
    AdamMoments moments = AdamMoments::zeros_like(result.model.params);
    const AdamSettings settings = adam_settings(config);
    rng::Generator windows(rng::derive_seed(config.seed, "windows", 0.0));
    const LstmState zero = init_state(config.n_cells);

    long step_index = 0;
    for (int epoch = 0; epoch < config.n_epochs; ++epoch) {
        for (long b = 0; b < plan.batches_per_epoch; ++b) {
            Gradients batch_grads = Gradients::zeros_like(result.model.params);
            double batch_loss = 0.0;
            try {
                for (int k = 0; k < config.batch_size; ++k) {
                    const auto start = windows.below(max_start + 1);
                    const std::span<const double> in(x.data() + start, T);
                    const std::span<const double> target(x.data() + start + 1, T);
                    BpttResult r = bptt(result.model.params, zero, in, target);
                    batch_loss += r.loss;
                    batch_grads += r.grads;
                }
            } catch (const DivergenceError& e) {
                throw TrainingDivergence(e.what(), last_finite, step_index);
            }
            last_finite = result.model;
            const double norm = adam_step(result.model.params, batch_grads, moments, settings);
            if (!std::isfinite(norm) || !result.model.params.all_finite())
                throw TrainingDivergence("non-finite gradient at step " + std::to_string(step_index + 1),
                                         last_finite, step_index);
            ++step_index;
            TrainLogRow row{step_index, batch_loss / config.batch_size, norm};
            result.log.push_back(row);
            result.final_loss = row.loss;
            if (hooks.on_step) hooks.on_step(row);
            if (hooks.checkpoint_every > 0 && hooks.on_checkpoint && step_index % hooks.checkpoint_every == 0)
                hooks.on_checkpoint(step_index, result.model);
        }
    }
    return result;
}

}  // namespace mglstm
