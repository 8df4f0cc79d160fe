#pragma once

// Backpropagation through time, the summed squared loss, ADAM, and the
// windowed training loop.

#include "mglstm/error.hpp"
#include "mglstm/lstm.hpp"
#include "mglstm/mackey_glass.hpp"
#include "mglstm/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace mglstm {

struct TrainConfig {
    int n_cells = 32;
    Candidate candidate = Candidate::Sigmoid;
    int seq_len = 100;  ///< T, steps per training window
    int n_epochs = 50;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double grad_clip = 5.0;
    double init_scale = 0.0;  ///< 0 selects 1/sqrt(n_cells)
    double forget_bias = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
    double effective_init_scale() const;
};

/// Same layout as LstmParams; one entry per parameter entry.
struct Gradients : ParamTensors {
    static Gradients zeros_like(const ParamTensors& params);

    Gradients& operator+=(const Gradients& other);
    Gradients& operator*=(double factor);
    double global_norm() const;
};

struct AdamMoments {
    ParamTensors m;
    ParamTensors v;
    long step_count = 0;

    static AdamMoments zeros_like(const ParamTensors& params);
};

struct AdamSettings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double grad_clip = 5.0;  ///< <= 0 disables clipping
};

/// Raised when the loss or the parameters stop being finite.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what) : Error("training-divergence", what) {}
};

/// Divergence during `train`, carrying the last model whose loss was finite.
class TrainingDivergence : public DivergenceError {
public:
    TrainingDivergence(const std::string& what, Model last_finite, long step)
      : DivergenceError(what), last_finite_(std::move(last_finite)), step_(step)
    {
    }

    const Model& last_finite() const { return last_finite_; }
    long step() const { return step_; }

private:
    Model last_finite_;
    long step_;
};

/// sum_t 0.5 (pred_t - target_t)^2
double loss(std::span<const double> preds, std::span<const double> targets);

struct BpttResult {
    double loss = 0.0;
    Gradients grads;
};

/// Exact gradients of the summed loss over one window, starting from
/// `initial_state`. inputs[t] is fed at step t and targets[t] is compared with
/// the resulting prediction.
BpttResult bptt(const LstmParams& params, const LstmState& initial_state, std::span<const double> inputs,
                std::span<const double> targets);

/// Rescale `grads` so that its global norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

/// ADAM with bias correction on a flat parameter array. `step` is the
/// 1-based index of this update.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, long step, const AdamSettings& settings);

/// Clip `grads` (a copy) at settings.grad_clip, then apply one ADAM update.
/// Returns the gradient norm before clipping.
double adam_step(LstmParams& params, const Gradients& grads, AdamMoments& moments, const AdamSettings& settings);

AdamSettings adam_settings(const TrainConfig& config);

LstmParams initialize_params(const TrainConfig& config);

struct TrainLogRow {
    long step = 0;
    double loss = 0.0;  ///< batch loss divided by the batch size
    double grad_norm = 0.0;
};

struct TrainHooks {
    std::function<void(const TrainLogRow&)> on_step;
    long checkpoint_every = 0;  ///< 0 disables checkpoints
    std::function<void(long step, const Model&)> on_checkpoint;
};

struct TrainResult {
    Model model;
    std::vector<TrainLogRow> log;
    double final_loss = 0.0;
};

/// Number of ADAM updates `train` will perform for a series of `length` samples.
long planned_steps(const TrainConfig& config, std::size_t length);

/// Train one model on `data` (original scale). The scaler is fitted on `data`;
/// every window starts from the zero state. Throws TrainingDivergence.
TrainResult train(double sigma, const NoisySeries& data, const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace mglstm
