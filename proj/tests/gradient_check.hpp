#pragma once

#include "mglstm/training.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace testing {

struct GradientCheck {
    double worst = 0.0;      ///< largest |g - fd| / allowed; <= 1 passes
    double max_rel = 0.0;    ///< largest relative error among entries above the floor
    double loss_rel = 0.0;   ///< relative gap between the bptt loss and the scalar loss
    std::size_t entries = 0;
};

/// Compare bptt gradients with central differences (step 1e-6) of the scalar
/// reference loss; allowed error is max(1e-8, 1e-5 * max(|g|, |fd|)).
inline GradientCheck gradient_check(const mglstm::LstmParams& params, const std::vector<double>& in,
                                    const std::vector<double>& target)
{
    using namespace mglstm;
    const BpttResult r = bptt(params, init_state(params.n_cells()), in, target);
    GradientCheck out;
    const double ref = oracle::sequence_loss(params, in, target);
    out.loss_rel = std::abs(r.loss - ref) / std::max(std::abs(ref), 1e-300);
    LstmParams probe = params;
    auto p = probe.tensors();
    const auto g = r.grads.tensors();
    for (std::size_t k = 0; k < ParamTensors::kCount; ++k) {
        for (Eigen::Index e = 0; e < p[k]->size(); ++e) {
            double& w = p[k]->data()[e];
            const double saved = w;
            w = saved + 1e-6;
            const double up = oracle::sequence_loss(probe, in, target);
            w = saved - 1e-6;
            const double down = oracle::sequence_loss(probe, in, target);
            w = saved;
            const double fd = (up - down) / 2e-6;
            const double an = g[k]->data()[e];
            const double scale = std::max(std::abs(an), std::abs(fd));
            const double allowed = std::max(1e-8, 1e-5 * scale);
            out.worst = std::max(out.worst, std::abs(an - fd) / allowed);
            if (1e-5 * scale > 1e-8) out.max_rel = std::max(out.max_rel, std::abs(an - fd) / scale);
            ++out.entries;
        }
    }
    return out;
}

}  // namespace testing
