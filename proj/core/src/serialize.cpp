#include "cbo/serialize.hpp"

#include <cmath>

#include <json.hpp>

#include "cbo/errors.hpp"

namespace cbo {

namespace {

using json = nlohmann::ordered_json;

constexpr int kVersion = 1;
constexpr const char* kFitcFormat = "cbo.fitc_model";
constexpr const char* kPosteriorFormat = "cbo.weight_posterior";

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

double number_at(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_number()) throw FormatError(std::string("field '") + field + "' must be a number");
  const double v = j.at(field).get<double>();
  if (!std::isfinite(v)) throw FormatError(std::string("field '") + field + "' is not finite");
  return v;
}

Vector vector_at(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_array()) throw FormatError(std::string("field '") + field + "' must be an array");
  const json& a = j.at(field);
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw FormatError(std::string("field '") + field + "' holds a non-number");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

Matrix matrix_at(const json& j, const char* field, Eigen::Index cols) {
  if (!j.contains(field) || !j.at(field).is_array()) throw FormatError(std::string("field '") + field + "' must be an array");
  const json& rows = j.at(field);
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != static_cast<std::size_t>(cols)) {
      throw FormatError(std::string("row ") + std::to_string(i) + " of '" + field + "' has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& x = rows[i][static_cast<std::size_t>(c)];
      if (!x.is_number()) throw FormatError(std::string("field '") + field + "' holds a non-number");
      m(static_cast<Eigen::Index>(i), c) = x.get<double>();
    }
  }
  return m;
}

json parse_document(std::string_view text, const char* format) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("snapshot is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("snapshot must be a JSON object");
  if (!j.contains("format") || j.at("format") != format) {
    throw FormatError(std::string("expected format '") + format + "'");
  }
  if (!j.contains("version") || j.at("version") != kVersion) throw FormatError("unsupported snapshot version");
  return j;
}

}  // namespace

std::string to_json(const FitcModel& model) {
  json j;
  j["format"] = kFitcFormat;
  j["version"] = kVersion;
  j["kernel"] = {{"log_lengthscales", vector_json(model.kernel().log_lengthscales)},
                 {"log_signal_variance", model.kernel().log_signal_variance}};
  j["inducing_locations"] = matrix_json(model.inducing_locations());
  j["log_noise_variance"] = model.log_noise_variance();
  j["jitter"] = model.jitter();
  if (model.train_inputs().rows() > 0) {
    j["train_inputs"] = matrix_json(model.train_inputs());
    j["train_targets"] = vector_json(model.train_targets());
  }
  return j.dump();
}

FitcModel fitc_model_from_json(std::string_view text) {
  const json j = parse_document(text, kFitcFormat);
  if (!j.contains("kernel") || !j.at("kernel").is_object()) throw FormatError("field 'kernel' must be an object");
  KernelHyperparams hp{vector_at(j.at("kernel"), "log_lengthscales"),
                       number_at(j.at("kernel"), "log_signal_variance")};
  const auto d = static_cast<Eigen::Index>(hp.dim());
  Matrix inducing = matrix_at(j, "inducing_locations", d);
  try {
    FitcModel model(std::move(hp), std::move(inducing), number_at(j, "log_noise_variance"), number_at(j, "jitter"));
    if (j.contains("train_inputs")) {
      Matrix X = matrix_at(j, "train_inputs", d);
      Vector y = vector_at(j, "train_targets");
      if (y.size() != X.rows()) throw FormatError("train_targets length differs from train_inputs");
      model.condition_on(std::move(X), std::move(y));
    }
    return model;
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("snapshot does not describe a valid model: ") + e.what());
  }
}

std::string to_json(const WeightPosterior& posterior) {
  json widths = json::array();
  for (std::size_t w : posterior.arch.layer_widths) widths.push_back(w);
  json j;
  j["format"] = kPosteriorFormat;
  j["version"] = kVersion;
  j["architecture"] = {
      {"layer_widths", widths},
      {"hidden_activation", posterior.arch.hidden_activation == Activation::relu ? "relu" : "gaussian_rbf"}};
  j["mean"] = vector_json(posterior.mean);
  j["log_variance"] = vector_json(posterior.log_variance);
  j["input_shift"] = vector_json(posterior.input_shift);
  j["input_scale"] = vector_json(posterior.input_scale);
  return j.dump();
}

WeightPosterior weight_posterior_from_json(std::string_view text) {
  const json j = parse_document(text, kPosteriorFormat);
  if (!j.contains("architecture") || !j.at("architecture").is_object()) {
    throw FormatError("field 'architecture' must be an object");
  }
  const json& a = j.at("architecture");
  WeightPosterior post;
  if (!a.contains("layer_widths") || !a.at("layer_widths").is_array()) {
    throw FormatError("field 'layer_widths' must be an array");
  }
  for (const json& w : a.at("layer_widths")) {
    if (!w.is_number_unsigned()) throw FormatError("layer widths must be non-negative integers");
    post.arch.layer_widths.push_back(w.get<std::size_t>());
  }
  const std::string act = a.value("hidden_activation", "");
  if (act == "relu") {
    post.arch.hidden_activation = Activation::relu;
  } else if (act == "gaussian_rbf") {
    post.arch.hidden_activation = Activation::gaussian_rbf;
  } else {
    throw FormatError("unknown hidden_activation '" + act + "'");
  }
  post.mean = vector_at(j, "mean");
  post.log_variance = vector_at(j, "log_variance");
  post.input_shift = vector_at(j, "input_shift");
  post.input_scale = vector_at(j, "input_scale");
  try {
    post.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("snapshot does not describe a valid posterior: ") + e.what());
  }
  return post;
}

}  // namespace cbo
