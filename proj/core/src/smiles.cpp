#include "cbo/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cbo::smiles {

namespace {

constexpr std::string_view kStandardAlphabet =
#include "smiles_alphabet.inc"
    ;

std::string_view strip_trailing(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Bond orders; aromatic bonds count 1 here and are tracked separately.
struct Bond {
  int order = 1;
  bool aromatic = false;
};

struct Atom {
  std::string element;
  bool aromatic = false;
  bool bracket = false;
  int hydrogens = 0;  // explicit, bracket atoms only
  int charge = 0;
  std::size_t position = 0;
  int bond_sum = 0;
  int aromatic_bonds = 0;
};

std::vector<int> base_valences(const std::string& element) {
  if (element == "B") return {3};
  if (element == "C") return {4};
  if (element == "N") return {3};
  if (element == "O") return {2};
  if (element == "P") return {3, 5};
  if (element == "S") return {2, 4, 6};
  if (element == "F" || element == "Cl" || element == "Br" || element == "I") return {1};
  if (element == "H" || element == "Li" || element == "Na" || element == "K") return {1};
  return {};
}

// Largest bond-order sum allowed for the (charged) atom.
int max_valence(const Atom& a) {
  const std::vector<int> v = base_valences(a.element);
  if (v.empty()) return -1;
  const int top = v.back();
  if (a.element == "C") return top - std::abs(a.charge);
  if (a.element == "B" || a.element == "Li" || a.element == "Na" || a.element == "K") return top - a.charge;
  return top + a.charge;
}

// Parses the inside of "[...]": optional chirality, H count and charge.
bool parse_bracket(std::string_view body, Atom& atom) {
  std::size_t i = 0;
  auto is_lower = [&](std::size_t k) { return k < body.size() && std::islower(static_cast<unsigned char>(body[k])); };
  if (i >= body.size()) return false;
  if (std::islower(static_cast<unsigned char>(body[i]))) {
    atom.aromatic = true;
    atom.element = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(body[i]))));
    ++i;
  } else if (std::isupper(static_cast<unsigned char>(body[i]))) {
    atom.element = std::string(1, body[i]);
    ++i;
    if (is_lower(i) && atom.element != "H" && !base_valences(atom.element + body[i]).empty()) {
      atom.element += body[i];
      ++i;
    }
  } else {
    return false;
  }
  while (i < body.size() && body[i] == '@') ++i;
  if (i < body.size() && body[i] == 'H') {
    ++i;
    atom.hydrogens = 1;
    if (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) atom.hydrogens = body[i++] - '0';
  }
  if (i < body.size() && (body[i] == '+' || body[i] == '-')) {
    const int sign = body[i] == '+' ? 1 : -1;
    int count = 0;
    const char c = body[i];
    while (i < body.size() && body[i] == c) {
      ++count;
      ++i;
    }
    if (count == 1 && i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) count = body[i++] - '0';
    atom.charge = sign * count;
  }
  return i == body.size() && !base_valences(atom.element).empty();
}

ValidityReport failure(FailureKind kind, std::optional<std::size_t> position) {
  return ValidityReport{false, kind, position};
}

bool valence_ok(const Atom& a) {
  const int top = max_valence(a);
  if (top < 0) return false;
  const int used = a.bond_sum + a.hydrogens;
  if (!a.aromatic) return used <= top;
  if (a.aromatic_bonds < 2) return false;  // aromatic atoms must sit in an aromatic ring
  if (used + 1 <= top) return true;        // takes part in one ring double bond
  // Lone-pair donor (pyrrole-type n, furan o, thiophene s).
  const bool donor = a.element == "N" || a.element == "O" || a.element == "S" || a.element == "P";
  return donor && used <= top;
}

}  // namespace

Alphabet::Alphabet(std::vector<std::string> tokens, std::string stop, int version)
    : tokens_(std::move(tokens)), version_(version) {
  std::size_t stops = 0;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw ConfigError("tokens", "empty token");
    if (!index_.emplace(tokens_[i], i).second) throw ConfigError("tokens", "duplicate token '" + tokens_[i] + "'");
    if (tokens_[i] == stop) {
      stop_index_ = i;
      ++stops;
    }
    max_token_length_ = std::max(max_token_length_, tokens_[i].size());
  }
  if (stops != 1) throw ConfigError("stop", "stop symbol must appear exactly once in tokens");
}

Alphabet Alphabet::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("alphabet JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("tokens") || !doc.contains("stop")) {
    throw FormatError("alphabet JSON needs \"tokens\" and \"stop\"");
  }
  try {
    return Alphabet(doc.at("tokens").get<std::vector<std::string>>(), doc.at("stop").get<std::string>(),
                    doc.value("version", 1));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("alphabet JSON: ") + e.what());
  }
}

Alphabet Alphabet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open alphabet file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

const Alphabet& Alphabet::standard() {
  static const Alphabet a = from_json(kStandardAlphabet);
  return a;
}

std::optional<std::size_t> Alphabet::index_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Alphabet::match(std::string_view s, std::size_t pos) const {
  const std::size_t longest = std::min(max_token_length_, s.size() - pos);
  for (std::size_t len = longest; len > 0; --len) {
    const auto it = index_.find(std::string(s.substr(pos, len)));
    if (it != index_.end() && it->second != stop_index_) return len;
  }
  return 0;
}

std::vector<std::string> tokenize(std::string_view s, const Alphabet& alphabet) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t len = alphabet.match(s, pos);
    if (len == 0) throw LexError(pos, "unknown character '" + std::string(1, s[pos]) + "'");
    out.emplace_back(s.substr(pos, len));
    pos += len;
  }
  return out;
}

OneHotMatrix encode_one_hot(std::string_view s, const Alphabet& alphabet, std::size_t max_len) {
  const std::vector<std::string> tokens = tokenize(s, alphabet);
  if (tokens.size() > max_len) {
    throw LengthError(std::to_string(tokens.size()) + " tokens exceed max_len " + std::to_string(max_len));
  }
  OneHotMatrix m = OneHotMatrix::Zero(static_cast<Eigen::Index>(max_len), static_cast<Eigen::Index>(alphabet.size()));
  for (std::size_t i = 0; i < max_len; ++i) {
    const std::size_t col = i < tokens.size() ? *alphabet.index_of(tokens[i]) : alphabet.stop_index();
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) = 1;
  }
  return m;
}

std::string decode_one_hot(const OneHotMatrix& m, const Alphabet& alphabet) {
  if (m.cols() != static_cast<Eigen::Index>(alphabet.size())) {
    throw FormatError("one-hot matrix has " + std::to_string(m.cols()) + " columns, alphabet has " +
                      std::to_string(alphabet.size()));
  }
  std::string out;
  bool stopped = false;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index col = -1;
    int sum = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) > 1) throw FormatError("row " + std::to_string(i) + " is not binary");
      if (m(i, j) == 1) {
        ++sum;
        col = j;
      }
    }
    if (sum != 1) throw FormatError("row " + std::to_string(i) + " sums to " + std::to_string(sum));
    if (stopped) continue;
    if (static_cast<std::size_t>(col) == alphabet.stop_index()) {
      stopped = true;
      continue;
    }
    out += alphabet.tokens()[static_cast<std::size_t>(col)];
  }
  return out;
}

std::string_view to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::lex_error: return "lex_error";
    case FailureKind::unbalanced_paren: return "unbalanced_paren";
    case FailureKind::unpaired_ring_bond: return "unpaired_ring_bond";
    case FailureKind::dangling_bond: return "dangling_bond";
    case FailureKind::valence_violation: return "valence_violation";
    case FailureKind::empty: return "empty";
  }
  return "unknown";
}

ValidityReport check_validity(std::string_view raw, const Alphabet& alphabet) {
  const std::string_view s = strip_trailing(raw);
  if (s.empty()) return failure(FailureKind::empty, std::nullopt);

  std::vector<std::string> tokens;
  try {
    tokens = tokenize(s, alphabet);
  } catch (const LexError& e) {
    return failure(FailureKind::lex_error, e.position());
  }

  struct PendingBond {
    int order;
    std::size_t position;
  };
  struct OpenRing {
    std::size_t atom;
    std::optional<int> order;
    std::size_t position;
  };
  struct Branch {
    std::optional<std::size_t> root;
    std::size_t position;
    bool empty = true;
  };

  std::vector<Atom> atoms;
  std::optional<std::size_t> prev;
  std::optional<PendingBond> pending;
  std::vector<Branch> branches;
  std::unordered_map<std::string, OpenRing> rings;

  auto connect = [&](std::size_t a, std::size_t b, std::optional<int> order) {
    Bond bond;
    if (order) {
      bond.order = *order;
    } else if (atoms[a].aromatic && atoms[b].aromatic) {
      bond.aromatic = true;
    }
    for (std::size_t k : {a, b}) {
      atoms[k].bond_sum += bond.order;
      atoms[k].aromatic_bonds += bond.aromatic ? 1 : 0;
    }
  };

  std::size_t pos = 0;
  for (const std::string& tok : tokens) {
    const std::size_t here = pos;
    pos += tok.size();
    const char c = tok[0];
    if (c == '(') {
      if (!prev || pending || (!branches.empty() && branches.back().empty)) {
        return failure(pending ? FailureKind::dangling_bond : FailureKind::unbalanced_paren,
                       pending ? pending->position : here);
      }
      branches.push_back(Branch{prev, here});
    } else if (c == ')') {
      if (branches.empty()) return failure(FailureKind::unbalanced_paren, here);
      if (pending) return failure(FailureKind::dangling_bond, pending->position);
      if (branches.back().empty) return failure(FailureKind::unbalanced_paren, here);
      prev = branches.back().root;
      branches.pop_back();
    } else if (c == '-' || c == '=' || c == '#' || c == '/' || c == '\\') {
      if (!prev || pending) return failure(FailureKind::dangling_bond, here);
      pending = PendingBond{c == '=' ? 2 : c == '#' ? 3 : 1, here};
    } else if (c == '%' || std::isdigit(static_cast<unsigned char>(c))) {
      if (!prev || (!branches.empty() && branches.back().empty)) {
        return failure(FailureKind::unpaired_ring_bond, here);
      }
      const std::optional<int> order = pending ? std::optional<int>(pending->order) : std::nullopt;
      const auto it = rings.find(tok);
      if (it == rings.end()) {
        rings.emplace(tok, OpenRing{*prev, order, here});
      } else {
        const OpenRing open = it->second;
        rings.erase(it);
        if (open.atom == *prev) return failure(FailureKind::unpaired_ring_bond, here);
        if (order && open.order && *order != *open.order) return failure(FailureKind::dangling_bond, pending->position);
        connect(open.atom, *prev, order ? order : open.order);
      }
      pending.reset();
    } else {
      Atom atom;
      atom.position = here;
      if (c == '[') {
        atom.bracket = true;
        if (!parse_bracket(std::string_view(tok).substr(1, tok.size() - 2), atom)) {
          return failure(FailureKind::lex_error, here);
        }
      } else {
        atom.aromatic = std::islower(static_cast<unsigned char>(c)) != 0;
        atom.element = tok;
        if (atom.aromatic) atom.element[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      }
      atoms.push_back(atom);
      const std::size_t idx = atoms.size() - 1;
      if (prev) connect(*prev, idx, pending ? std::optional<int>(pending->order) : std::nullopt);
      pending.reset();
      prev = idx;
      if (!branches.empty()) branches.back().empty = false;
    }
  }

  if (pending) return failure(FailureKind::dangling_bond, pending->position);
  if (!branches.empty()) return failure(FailureKind::unbalanced_paren, branches.front().position);
  if (!rings.empty()) {
    std::size_t first = s.size();
    for (const auto& [label, open] : rings) first = std::min(first, open.position);
    return failure(FailureKind::unpaired_ring_bond, first);
  }
  if (atoms.empty()) return failure(FailureKind::empty, std::nullopt);
  for (const Atom& a : atoms) {
    if (!valence_ok(a)) return failure(FailureKind::valence_violation, a.position);
  }
  return ValidityReport{true, std::nullopt, std::nullopt};
}

bool is_drug_like(std::string_view s) {
  const std::string_view t = strip_trailing(s);
  return t.size() >= 5 && check_validity(t).valid;
}

int label_latent_point(const std::vector<std::string>& outcomes, double threshold) {
  if (outcomes.empty()) throw ConfigError("outcomes", "need at least one decode outcome");
  std::size_t good = 0;
  for (const auto& s : outcomes) good += is_drug_like(s) ? 1 : 0;
  return static_cast<double>(good) > threshold * static_cast<double>(outcomes.size()) ? 1 : 0;
}

std::string to_json(const ValidityReport& report) {
  nlohmann::ordered_json j;
  j["valid"] = report.valid;
  j["failure_kind"] = report.failure_kind ? nlohmann::ordered_json(std::string(to_string(*report.failure_kind)))
                                          : nlohmann::ordered_json(nullptr);
  j["failure_position"] =
      report.failure_position ? nlohmann::ordered_json(*report.failure_position) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

}  // namespace cbo::smiles
