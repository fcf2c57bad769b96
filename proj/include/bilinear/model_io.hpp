#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "bilinear/model.hpp"

namespace bilinear {

// Plain-text model files. One header line identifying kind and shape:
//   llr M N          followed by the M*N entries of W in row-major order
//   blr M N L        followed by a_1..a_L (M values each), then b_1..b_L
//   lsr M N K        followed by W_1..W_K, each row-major
//   bsr M N L K      followed by, per class k: a_1..a_L then b_1..b_L
// Values are whitespace-separated, written in decimal shortest-round-trip
// form so a save/load cycle is bit-preserving.

void save_model(std::ostream& os, const LinearModel& m);
void save_model(std::ostream& os, const BilinearModel& m);
void save_model(std::ostream& os, const LinearSoftmaxModel& m);
void save_model(std::ostream& os, const BilinearSoftmaxModel& m);

using AnyModel =
    std::variant<LinearModel, BilinearModel, LinearSoftmaxModel, BilinearSoftmaxModel>;

// Reads any of the four kinds, dispatching on the header. Malformed content
// raises DataError.
AnyModel load_model(std::istream& is);

// The header keyword for a loaded model ("llr", "blr", "lsr", "bsr").
std::string model_kind(const AnyModel& m);

void save_model_file(const std::string& path, const AnyModel& m);
AnyModel load_model_file(const std::string& path);

}  // namespace bilinear
