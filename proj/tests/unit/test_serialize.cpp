#include <random>

#include <gtest/gtest.h>

#include "cbo/errors.hpp"
#include "cbo/serialize.hpp"
#include "support/fixtures.hpp"

namespace cbo {
namespace {

TEST(FitcSnapshot, RoundTripIsExact) {
  std::mt19937_64 rng(5);
  Matrix X;
  Vector y;
  fixture::random_data(rng, 12, 3, X, y);
  KernelHyperparams hp{Vector::LinSpaced(3, -1.3, 0.7), 0.1 / 3.0};
  FitcModel model(hp, X.topRows(4), std::log(0.013), 2e-6);
  model.condition_on(X, y);

  const std::string text = to_json(model);
  const FitcModel back = fitc_model_from_json(text);
  EXPECT_EQ(back.kernel().log_lengthscales, model.kernel().log_lengthscales);
  EXPECT_EQ(back.kernel().log_signal_variance, model.kernel().log_signal_variance);
  EXPECT_EQ(back.inducing_locations(), model.inducing_locations());
  EXPECT_EQ(back.log_noise_variance(), model.log_noise_variance());
  EXPECT_EQ(back.jitter(), model.jitter());
  ASSERT_TRUE(back.is_factorized());
  const Matrix Zq = X.topRows(5).array() + 0.01;
  EXPECT_EQ(back.predict(Zq).mean, model.predict(Zq).mean);
  EXPECT_EQ(to_json(back), text);
}

TEST(FitcSnapshot, ModelWithoutDataStaysUnconditioned) {
  const FitcModel model(KernelHyperparams{Vector::Zero(2), 0.0}, Matrix::Identity(2, 2), -3.0);
  const FitcModel back = fitc_model_from_json(to_json(model));
  EXPECT_FALSE(back.is_factorized());
  EXPECT_EQ(back.inducing_locations(), model.inducing_locations());
}

TEST(FitcSnapshot, FieldNames) {
  const FitcModel model(KernelHyperparams{Vector::Zero(1), 0.0}, Matrix::Zero(1, 1), -3.0);
  const std::string text = to_json(model);
  for (const char* field : {"\"format\":\"cbo.fitc_model\"", "\"version\":1", "\"log_lengthscales\"",
                            "\"log_signal_variance\"", "\"inducing_locations\"", "\"log_noise_variance\"",
                            "\"jitter\""}) {
    EXPECT_NE(text.find(field), std::string::npos) << field;
  }
}

TEST(FitcSnapshot, RejectsMalformedDocuments) {
  EXPECT_THROW(fitc_model_from_json("not json"), FormatError);
  EXPECT_THROW(fitc_model_from_json("[]"), FormatError);
  EXPECT_THROW(fitc_model_from_json(R"({"format":"cbo.weight_posterior","version":1})"), FormatError);
  EXPECT_THROW(fitc_model_from_json(R"({"format":"cbo.fitc_model","version":2})"), FormatError);
  // inducing row with the wrong width
  EXPECT_THROW(fitc_model_from_json(R"({"format":"cbo.fitc_model","version":1,
      "kernel":{"log_lengthscales":[0,0],"log_signal_variance":0},
      "inducing_locations":[[0]],"log_noise_variance":-2,"jitter":1e-5})"),
               FormatError);
  // non-positive jitter
  EXPECT_THROW(fitc_model_from_json(R"({"format":"cbo.fitc_model","version":1,
      "kernel":{"log_lengthscales":[0],"log_signal_variance":0},
      "inducing_locations":[[0]],"log_noise_variance":-2,"jitter":0})"),
               FormatError);
}

TEST(PosteriorSnapshot, RoundTripIsExact) {
  WeightPosterior post = init_posterior(BnnArchitecture::two_hidden(3, 4), 9);
  post.mean.setRandom();
  post.input_shift = Vector::LinSpaced(3, -0.25, 0.5);
  post.input_scale = Vector::Constant(3, 1.0 / 7.0);
  const std::string text = to_json(post);
  const WeightPosterior back = weight_posterior_from_json(text);
  EXPECT_EQ(back.arch.layer_widths, post.arch.layer_widths);
  EXPECT_EQ(back.arch.hidden_activation, post.arch.hidden_activation);
  EXPECT_EQ(back.mean, post.mean);
  EXPECT_EQ(back.log_variance, post.log_variance);
  EXPECT_EQ(back.input_shift, post.input_shift);
  EXPECT_EQ(back.input_scale, post.input_scale);
  EXPECT_EQ(to_json(back), text);
}

TEST(PosteriorSnapshot, RejectsSizeMismatch) {
  const WeightPosterior post = init_posterior(BnnArchitecture::single_hidden(2, 3), 1);
  std::string text = to_json(post);
  const auto at = text.find("\"mean\":[") + 8;
  text.insert(at, "0.5,");
  EXPECT_THROW(weight_posterior_from_json(text), FormatError);
  EXPECT_THROW(weight_posterior_from_json(R"({"format":"cbo.weight_posterior","version":1,
      "architecture":{"layer_widths":[1,1],"hidden_activation":"tanh"}})"),
               FormatError);
}

}  // namespace
}  // namespace cbo
