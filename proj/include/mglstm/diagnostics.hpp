#pragma once

// Measurements on trained models: one-step sequential prediction and its
// NRMSE, the zeroth-order baseline, the recurrent-vs-data contribution ratio,
// the periodic impulse experiment and the relaxation timescale.

#include "mglstm/lstm.hpp"
#include "mglstm/mackey_glass.hpp"
#include "mglstm/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mglstm {

struct CaptureFlags {
    bool states = false;
    bool traces = false;
};

/// preds[t] is the prediction of the value at t + 1 made after feeding
/// inputs[t]; truth[t] (optional) is mu at the same instant as inputs[t].
struct PredictionRun {
    std::vector<double> inputs;
    std::vector<double> preds;
    std::vector<double> truth;
    std::vector<LstmState> states;  ///< state after each step, if captured
    std::vector<StepTrace> traces;  ///< if captured
    bool scaler_warning = false;    ///< inputs left [min - 3 nu, max + 3 nu]
};

/// Teacher-forced run on normalized inputs starting from the zero state.
/// Returns normalized predictions; `traces`/`states` are filled on request.
std::vector<double> predict_normalized(const LstmParams& params, std::span<const double> inputs,
                                       const CaptureFlags& capture = {}, std::vector<StepTrace>* traces = nullptr,
                                       std::vector<LstmState>* states = nullptr);

/// Feed every observation (never a prediction) through the model, starting
/// from the zero state. Observations and predictions are in original units.
PredictionRun sequential_predict(const Model& model, std::span<const double> observations,
                                 std::span<const double> truth = {}, const CaptureFlags& capture = {});

/// (1/nu) * sqrt(mean((truth - preds)^2))
double nrmse(std::span<const double> preds, std::span<const double> truth, double nu);

/// NRMSE of preds[t] against truth[t + 1], skipping the first `washout` predictions.
double one_step_nrmse(const PredictionRun& run, double nu, std::size_t washout = 0);

/// yhat_{t+1} = y_t, i.e. the first n - 1 observations.
std::vector<double> zeroth_order(std::span<const double> observations);

/// One-step NRMSE of the zeroth-order predictor against `truth`.
double zeroth_order_nrmse(std::span<const double> observations, std::span<const double> truth, double nu,
                          std::size_t washout = 0);

struct AlphaResult {
    double alpha = 0.0;
    double ratio = 0.0;  ///< alpha / (1 - alpha); +inf when alpha == 1
    bool ratio_overflow = false;
    std::size_t terms = 0;    ///< (t, i) pairs averaged
    std::size_t skipped = 0;  ///< pairs with a zero denominator
    std::vector<double> per_step;  ///< mean over cells of each step's term
};

/// Mean over steps and cells of |W_h h|_i / (|W_y y|_i + |W_h h|_i). Throws
/// UndefinedAlpha when every denominator is zero.
AlphaResult contribution_alpha(std::span<const StepTrace> traces);
AlphaResult contribution_alpha(const PredictionRun& run, std::size_t washout = 0);

/// sum_n (e_n - e_mu) / (e_0 - e_mu) * dt. Throws DegenerateRelaxation when
/// e_0 <= e_mu.
double relaxation_timescale(std::span<const double> profile, double e_mu, double dt = 1.0);

struct ImpulseSettings {
    int period = 150;
    double magnitude = 1.0;  ///< in normalized input units
    int n_ensembles = 64;
};

struct ImpulseResult {
    std::vector<double> e_n;  ///< ensemble NRMSE, n = 0 .. period - 1
    double e_0 = 0.0;
    double e_0_impulse = 0.0;  ///< e_0 expressed in units of the impulse height
    double e_mu_baseline = 0.0;
    double lambda = 0.0;
    int n_ensembles = 0;
};

/// Samples of clean input needed for `settings`.
std::size_t impulse_required_length(const ImpulseSettings& settings);

/// Kick the normalized input by `magnitude` every `period` steps of a
/// noiseless run. The first period is warm-up; each of the following
/// `n_ensembles` periods contributes one member of the ensemble average.
/// e_mu_baseline is the unperturbed NRMSE over the same steps.
ImpulseResult impulse_experiment(const Model& model, const Trajectory& clean, const ImpulseSettings& settings = {});

struct SweepTable {
    std::vector<double> train_sigmas;
    std::vector<double> eval_sigmas;
    std::vector<std::vector<double>> e_mu;  ///< [model][eval sigma]
    std::vector<double> zeroth_order;      ///< per eval sigma
};

/// Seed of the evaluation noise for one (model, eval sigma) cell.
std::uint64_t sweep_seed(std::uint64_t global_seed, double train_sigma, double eval_sigma);

/// One-step NRMSE of every model on fresh noisy copies of `clean`.
SweepTable noise_sweep(std::span<const Model> models, const Trajectory& clean, std::span<const double> eval_sigmas,
                       std::uint64_t global_seed, std::size_t washout);

}  // namespace mglstm
