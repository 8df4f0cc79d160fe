#include "mglstm/lstm.hpp"

#include "mglstm/error.hpp"

#include <string>

namespace mglstm {

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& x)
{
    return x.unaryExpr([](double v) { return mglstm::sigmoid(v); });
}

}  // namespace

std::string_view to_string(Candidate c)
{
    return c == Candidate::Sigmoid ? "sigmoid" : "tanh";
}

Candidate candidate_from_string(std::string_view text)
{
    if (text == "sigmoid") return Candidate::Sigmoid;
    if (text == "tanh") return Candidate::Tanh;
    throw ConfigError("unknown candidate nonlinearity '" + std::string(text) + "' (expected sigmoid|tanh)");
}

std::array<Eigen::MatrixXd*, ParamTensors::kCount> ParamTensors::tensors()
{
    return {&w_h, &w_y, &w_i, &w_o, &w_f, &w_s, &b_i, &b_o, &b_f, &b_s, &w_y1, &b_y1, &w_y2, &b_y2};
}

std::array<const Eigen::MatrixXd*, ParamTensors::kCount> ParamTensors::tensors() const
{
    return {&w_h, &w_y, &w_i, &w_o, &w_f, &w_s, &b_i, &b_o, &b_f, &b_s, &w_y1, &b_y1, &w_y2, &b_y2};
}

Eigen::Index ParamTensors::size() const
{
    Eigen::Index total = 0;
    for (const auto* t : tensors()) total += t->size();
    return total;
}

void ParamTensors::set_zero(int n)
{
    for (auto* m : {&w_h, &w_i, &w_o, &w_f, &w_s, &w_y1}) m->setZero(n, n);
    for (auto* v : {&w_y, &b_i, &b_o, &b_f, &b_s, &b_y1}) v->setZero(n, 1);
    w_y2.setZero(1, n);
    b_y2.setZero(1, 1);
}

void ParamTensors::check_shapes() const
{
    const Eigen::Index n = w_h.rows();
    if (n < 1) throw ParameterShapeError("n_cells must be at least 1");
    auto expect = [](const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, std::string_view name) {
        if (m.rows() != rows || m.cols() != cols)
            throw ParameterShapeError(std::string(name) + " has shape " + std::to_string(m.rows()) + "x" +
                                      std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                                      std::to_string(cols));
    };
    expect(w_h, n, n, "w_h");
    expect(w_y, n, 1, "w_y");
    expect(w_i, n, n, "w_i");
    expect(w_o, n, n, "w_o");
    expect(w_f, n, n, "w_f");
    expect(w_s, n, n, "w_s");
    expect(b_i, n, 1, "b_i");
    expect(b_o, n, 1, "b_o");
    expect(b_f, n, 1, "b_f");
    expect(b_s, n, 1, "b_s");
    expect(w_y1, n, n, "w_y1");
    expect(b_y1, n, 1, "b_y1");
    expect(w_y2, 1, n, "w_y2");
    expect(b_y2, 1, 1, "b_y2");
}

bool ParamTensors::all_finite() const
{
    for (const auto* t : tensors())
        if (!t->allFinite()) return false;
    return true;
}

LstmParams LstmParams::zeros(int n_cells, Candidate candidate)
{
    if (n_cells < 1) throw ParameterShapeError("n_cells must be at least 1");
    LstmParams p;
    p.set_zero(n_cells);
    p.candidate = candidate;
    return p;
}

LstmState init_state(int n_cells)
{
    if (n_cells < 1) throw ParameterShapeError("n_cells must be at least 1");
    return {Eigen::VectorXd::Zero(n_cells), Eigen::VectorXd::Zero(n_cells)};
}

StepResult step(const LstmParams& p, const LstmState& state, double y)
{
    p.check_shapes();
    const Eigen::Index n = p.n_cells();
    if (state.s.size() != n || state.h.size() != n)
        throw ParameterShapeError("state size " + std::to_string(state.s.size()) + " does not match n_cells " +
                                  std::to_string(n));

    StepResult r;
    StepTrace& t = r.trace;
    t.wh_h.noalias() = p.w_h * state.h;
    t.wy_y = p.w_y.col(0) * y;
    t.z = (t.wh_h + t.wy_y).array().tanh();
    t.gate_i = sigmoid(p.w_i * t.z + p.b_i.col(0));
    t.gate_o = sigmoid(p.w_o * t.z + p.b_o.col(0));
    t.gate_f = sigmoid(p.w_f * t.z + p.b_f.col(0));
    const Eigen::VectorXd cand_in = p.w_s * t.z + p.b_s.col(0);
    t.candidate = p.candidate == Candidate::Sigmoid ? sigmoid(cand_in) : Eigen::VectorXd(cand_in.array().tanh());

    r.next.s = t.gate_f.cwiseProduct(state.s) + t.gate_i.cwiseProduct(t.candidate);
    t.cell_tanh = r.next.s.array().tanh();
    r.next.h = t.gate_o.cwiseProduct(t.cell_tanh);
    t.readout = (p.w_y1 * r.next.h + p.b_y1.col(0)).array().tanh();
    r.y_hat = p.w_y2.row(0).dot(t.readout) + p.b_y2(0, 0);
    return r;
}

std::pair<double, double> l1_contribution(const StepTrace& trace)
{
    return {trace.wh_h.lpNorm<1>(), trace.wy_y.lpNorm<1>()};
}

}  // namespace mglstm
