#pragma once

// LSTM cell with a shared input network:
//
//   z    = tanh(W_h h + W_y y)
//   G_m  = sigmoid(W_m z + b_m),              m in {i, o, f}
//   s'   = G_f * s + G_i * g(W_s z + b_s)     g = sigmoid (default) or tanh
//   h'   = G_o * tanh(s')
//   yhat = W_y2 tanh(W_y1 h' + b_y1) + b_y2
//
// All arithmetic is in double precision.

#include <Eigen/Dense>

#include <array>
#include <string_view>
#include <utility>

namespace mglstm {

enum class Candidate { Sigmoid, Tanh };

std::string_view to_string(Candidate c);
Candidate candidate_from_string(std::string_view text);

/// The fourteen weight/bias arrays of the cell. Vectors are stored as
/// single-column matrices, W_y2 as a 1 x N row and b_y2 as a 1 x 1 matrix.
struct ParamTensors {
    Eigen::MatrixXd w_h, w_y;
    Eigen::MatrixXd w_i, w_o, w_f, w_s;
    Eigen::MatrixXd b_i, b_o, b_f, b_s;
    Eigen::MatrixXd w_y1, b_y1, w_y2, b_y2;

    static constexpr std::size_t kCount = 14;
    static constexpr std::array<std::string_view, kCount> kNames{
      "w_h", "w_y", "w_i", "w_o", "w_f", "w_s", "b_i", "b_o", "b_f", "b_s", "w_y1", "b_y1", "w_y2", "b_y2"};

    std::array<Eigen::MatrixXd*, kCount> tensors();
    std::array<const Eigen::MatrixXd*, kCount> tensors() const;

    int n_cells() const { return static_cast<int>(w_h.rows()); }
    /// Total number of scalar entries.
    Eigen::Index size() const;
    /// Resize every array for `n` cells and zero it.
    void set_zero(int n);
    /// Throws ParameterShapeError if any array disagrees with n_cells().
    void check_shapes() const;
    bool all_finite() const;
};

struct LstmParams : ParamTensors {
    Candidate candidate = Candidate::Sigmoid;

    static LstmParams zeros(int n_cells, Candidate candidate = Candidate::Sigmoid);
};

struct LstmState {
    Eigen::VectorXd s;  ///< internal (cell) state
    Eigen::VectorXd h;  ///< output state
};

/// Activations of one step. The first six fields are the quantities the
/// contribution diagnostics consume; the rest are kept for backpropagation.
struct StepTrace {
    Eigen::VectorXd wh_h;  ///< W_h h_t
    Eigen::VectorXd wy_y;  ///< W_y y_t
    Eigen::VectorXd z;
    Eigen::VectorXd gate_i, gate_o, gate_f;
    Eigen::VectorXd candidate;  ///< g(W_s z + b_s)
    Eigen::VectorXd cell_tanh;  ///< tanh(s')
    Eigen::VectorXd readout;    ///< tanh(W_y1 h' + b_y1)
};

struct StepResult {
    LstmState next;
    double y_hat = 0.0;
    StepTrace trace;
};

/// Numerically stable logistic function.
inline double sigmoid(double x)
{
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

LstmState init_state(int n_cells);

/// One forward step from `state` on the normalized observation `y`.
StepResult step(const LstmParams& params, const LstmState& state, double y);

/// (|W_h h_t|_1, |W_y y_t|_1)
std::pair<double, double> l1_contribution(const StepTrace& trace);

}  // namespace mglstm
