#pragma once

#include "mglstm/lstm.hpp"
#include "mglstm/mackey_glass.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace mglstm {

/// A trained predictor: cell parameters plus everything needed to feed it
/// original-scale observations.
struct Model {
    LstmParams params;
    Scaler scaler{-0.5, 0.5};
    double nu = 1.0;           ///< signal scale of the training trajectory
    double train_sigma = 0.0;  ///< noise level the model was trained on
    std::uint64_t seed = 0;
};

// Text persistence. Layout:
//
//   mglstm-model 1
//   n_cells <N>
//   candidate sigmoid|tanh
//   train_sigma <x>
//   seed <u64>
//   nu <x>
//   scaler_min <x>
//   scaler_max <x>
//   array <name> <rows> <cols>
//   <row-major values, one matrix row per line>
//   ... (one block per array)
//   end
//
// Reals use 17 significant digits, so a save/load cycle is bit-exact.
void save_model(std::ostream& out, const Model& model);
void save_model(const std::string& path, const Model& model);
Model load_model(std::istream& in);
Model load_model(const std::string& path);

}  // namespace mglstm
