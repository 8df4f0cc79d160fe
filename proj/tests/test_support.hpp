#pragma once

#include "mglstm/lstm.hpp"
#include "mglstm/rng.hpp"

#include <algorithm>
#include <cmath>

namespace testing {

/// Parameters with every entry uniform in [-scale, scale].
inline mglstm::LstmParams random_params(int n, std::uint64_t seed, double scale = 0.8,
                                        mglstm::Candidate candidate = mglstm::Candidate::Sigmoid)
{
    mglstm::LstmParams p = mglstm::LstmParams::zeros(n, candidate);
    mglstm::rng::Generator gen(seed);
    for (auto* t : p.tensors())
        for (Eigen::Index k = 0; k < t->size(); ++k) t->data()[k] = gen.uniform(-scale, scale);
    return p;
}

inline double rel_err(double a, double b)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace testing
