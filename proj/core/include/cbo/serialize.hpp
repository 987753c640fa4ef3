#pragma once

#include <string>
#include <string_view>

#include "cbo/bnn.hpp"
#include "cbo/sparse_gp.hpp"

namespace cbo {

/// JSON snapshot of a FITC model: kernel, inducing locations, noise, jitter,
/// and the conditioning data when the model has any. Numbers round-trip
/// exactly. Layout in docs/snapshot_schema.md.
std::string to_json(const FitcModel& model);

/// Inverse of to_json(FitcModel). A snapshot with data comes back factorized.
/// Throws FormatError on a malformed or mismatched document.
FitcModel fitc_model_from_json(std::string_view text);

/// Architecture, mean and log-variance arrays, input normalization.
std::string to_json(const WeightPosterior& posterior);

/// Throws FormatError on a malformed document or sizes that disagree with
/// the architecture.
WeightPosterior weight_posterior_from_json(std::string_view text);

}  // namespace cbo
