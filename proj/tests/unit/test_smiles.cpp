#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cbo/smiles.hpp"
#include "support/files.hpp"

namespace cbo::smiles {
namespace {

using Tokens = std::vector<std::string>;

TEST(SmilesAlphabet, StandardFileLoads) {
  const Alphabet& a = Alphabet::standard();
  EXPECT_EQ(a.stop(), " ");
  for (const char* t : {"C", "Cl", "Br", "c", "n", "1", "9", "%10", "%99", "=", "#", "(", ")", "[nH]", "[O-]"}) {
    EXPECT_TRUE(a.index_of(t).has_value()) << t;
  }
  const Alphabet from_file = Alphabet::load(fixture::data_path("smiles_alphabet.json"));
  EXPECT_EQ(from_file.tokens(), a.tokens());
}

TEST(SmilesAlphabet, RejectsBadDefinitions) {
  EXPECT_THROW(Alphabet({"C", "C", " "}, " "), ConfigError);
  EXPECT_THROW(Alphabet({"C", "N"}, " "), ConfigError);
  EXPECT_THROW(Alphabet::from_json("{\"tokens\": [\"C\"]}"), FormatError);
  EXPECT_THROW(Alphabet::from_json("not json"), FormatError);
}

TEST(Tokenize, Benzene) {
  EXPECT_EQ(tokenize("c1ccccc1"), (Tokens{"c", "1", "c", "c", "c", "c", "c", "1"}));
}

TEST(Tokenize, LongestMatch) {
  EXPECT_EQ(tokenize("CCl"), (Tokens{"C", "Cl"}));
  EXPECT_EQ(tokenize("BrC%12"), (Tokens{"Br", "C", "%12"}));
  EXPECT_EQ(tokenize("C[NH3+]"), (Tokens{"C", "[NH3+]"}));
  EXPECT_TRUE(tokenize("").empty());
}

TEST(Tokenize, UnknownCharacter) {
  try {
    tokenize("CQ");
    FAIL() << "expected LexError";
  } catch (const LexError& e) {
    EXPECT_EQ(e.position(), 1u);
  }
  // The stop symbol is never part of a string.
  EXPECT_THROW(tokenize("C C"), LexError);
}

TEST(OneHot, BenzeneLayout) {
  const Alphabet& a = Alphabet::standard();
  const OneHotMatrix m = encode_one_hot("c1ccccc1", a, 10);
  ASSERT_EQ(m.rows(), 10);
  ASSERT_EQ(m.cols(), static_cast<Eigen::Index>(a.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) EXPECT_EQ(m.row(i).cast<int>().sum(), 1);
  EXPECT_EQ(m(0, static_cast<Eigen::Index>(*a.index_of("c"))), 1);
  EXPECT_EQ(m(1, static_cast<Eigen::Index>(*a.index_of("1"))), 1);
  EXPECT_EQ(m(8, static_cast<Eigen::Index>(a.stop_index())), 1);
  EXPECT_EQ(m(9, static_cast<Eigen::Index>(a.stop_index())), 1);
  EXPECT_EQ(decode_one_hot(m, a), "c1ccccc1");
}

TEST(OneHot, EmptyStringIsAllStop) {
  const Alphabet& a = Alphabet::standard();
  const OneHotMatrix m = encode_one_hot("", a, 4);
  EXPECT_EQ(m.col(static_cast<Eigen::Index>(a.stop_index())).cast<int>().sum(), 4);
  EXPECT_EQ(decode_one_hot(m, a), "");
}

TEST(OneHot, Errors) {
  const Alphabet& a = Alphabet::standard();
  EXPECT_THROW(encode_one_hot("c1ccccc1", a, 7), LengthError);
  EXPECT_THROW(encode_one_hot("CQ", a, 7), LexError);
  OneHotMatrix m = encode_one_hot("CC", a, 3);
  m(1, static_cast<Eigen::Index>(*a.index_of("N"))) = 1;
  EXPECT_THROW(decode_one_hot(m, a), FormatError);
  m = encode_one_hot("CC", a, 3);
  m.row(0).setZero();
  EXPECT_THROW(decode_one_hot(m, a), FormatError);
}

TEST(OneHot, CorpusRoundtrip) {
  const Alphabet& a = Alphabet::standard();
  const auto corpus = fixture::read_lines("smiles/corpus.txt");
  ASSERT_EQ(corpus.size(), 200u);
  for (const auto& s : corpus) {
    const OneHotMatrix m = encode_one_hot(s, a, 64);
    for (Eigen::Index i = 0; i < m.rows(); ++i) ASSERT_EQ(m.row(i).cast<int>().sum(), 1) << s;
    EXPECT_EQ(decode_one_hot(m, a), s);
  }
}

FailureKind parse_kind(const std::string& s) {
  for (FailureKind k : {FailureKind::lex_error, FailureKind::unbalanced_paren, FailureKind::unpaired_ring_bond,
                        FailureKind::dangling_bond, FailureKind::valence_violation, FailureKind::empty}) {
    if (to_string(k) == s) return k;
  }
  throw std::runtime_error("bad kind " + s);
}

TEST(Validity, HandLabeledCorpus) {
  const auto rows = fixture::read_lines("smiles/validity_labeled.tsv");
  std::size_t valid = 0, invalid = 0;
  for (const auto& row : rows) {
    std::stringstream ss(row);
    std::string smiles, expected, position;
    std::getline(ss, smiles, '\t');
    std::getline(ss, expected, '\t');
    std::getline(ss, position, '\t');
    const ValidityReport r = check_validity(smiles);
    if (expected == "valid") {
      ++valid;
      EXPECT_TRUE(r.valid) << smiles << " -> " << to_json(r);
      EXPECT_FALSE(r.failure_kind.has_value());
      EXPECT_FALSE(r.failure_position.has_value());
      continue;
    }
    ++invalid;
    EXPECT_FALSE(r.valid) << smiles;
    ASSERT_TRUE(r.failure_kind.has_value()) << smiles;
    EXPECT_EQ(*r.failure_kind, parse_kind(expected)) << smiles << " -> " << to_json(r);
    if (position != "-") {
      ASSERT_TRUE(r.failure_position.has_value()) << smiles;
      EXPECT_EQ(*r.failure_position, std::stoul(position)) << smiles;
    }
  }
  EXPECT_EQ(valid, 30u);
  EXPECT_EQ(invalid, 30u);
}

TEST(Validity, Examples) {
  EXPECT_TRUE(check_validity("c1ccccc1").valid);
  EXPECT_EQ(check_validity("C1CC").failure_kind, FailureKind::unpaired_ring_bond);
  EXPECT_EQ(check_validity("C(C").failure_kind, FailureKind::unbalanced_paren);
  // Cyclopropane ring with a methyl: every carbon at or under valence 4 by hand.
  EXPECT_TRUE(check_validity("C1CC1C").valid);
  EXPECT_EQ(check_validity("").failure_kind, FailureKind::empty);
}

TEST(Validity, TrailingWhitespaceOnly) {
  EXPECT_TRUE(check_validity("CCO \t\n").valid);
  EXPECT_FALSE(check_validity(" CCO").valid);
  EXPECT_EQ(check_validity("   ").failure_kind, FailureKind::empty);
}

TEST(Validity, ChargesAndAromaticDonors) {
  EXPECT_TRUE(check_validity("C[N+](C)(C)C").valid);
  EXPECT_FALSE(check_validity("CN(C)(C)C").valid);
  EXPECT_TRUE(check_validity("c1ccoc1").valid);
  EXPECT_TRUE(check_validity("c1cc[nH]c1").valid);
  EXPECT_FALSE(check_validity("c1cc[nH]c1=O").valid);
}

TEST(Validity, TemplatesAreValid) {
  for (const auto& s : fixture::read_lines("smiles/templates.txt")) EXPECT_TRUE(check_validity(s).valid) << s;
}

TEST(DrugLike, Examples) {
  EXPECT_TRUE(is_drug_like("c1ccccc1"));
  EXPECT_FALSE(is_drug_like("C"));
  EXPECT_TRUE(is_drug_like("C1CC1C"));
  EXPECT_TRUE(is_drug_like("CCCCC"));
  EXPECT_FALSE(is_drug_like("CCCC"));
  EXPECT_FALSE(is_drug_like("C1CCCC"));
}

std::vector<std::string> outcomes(std::size_t good, std::size_t total) {
  std::vector<std::string> v(total, "C");
  for (std::size_t i = 0; i < good; ++i) v[i] = "c1ccccc1";
  return v;
}

TEST(LabelLatentPoint, StrictTwentyPercent) {
  EXPECT_EQ(label_latent_point(outcomes(21, 100)), 1);
  EXPECT_EQ(label_latent_point(outcomes(20, 100)), 0);
  EXPECT_EQ(label_latent_point(outcomes(0, 100)), 0);
  EXPECT_EQ(label_latent_point(outcomes(1, 1)), 1);
  EXPECT_THROW(label_latent_point({}), ConfigError);
}

TEST(ValidityReport, Json) {
  EXPECT_EQ(to_json(check_validity("CCO")), R"({"valid":true,"failure_kind":null,"failure_position":null})");
  EXPECT_EQ(to_json(check_validity("CQ")), R"({"valid":false,"failure_kind":"lex_error","failure_position":1})");
}

}  // namespace
}  // namespace cbo::smiles
