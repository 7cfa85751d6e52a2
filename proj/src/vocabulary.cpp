#include "conceptor/vocabulary.hpp"

#include <bit>
#include <cstring>

#include "conceptor/attributes.hpp"
#include "conceptor/sha256.hpp"

namespace conceptor {

std::string_view role_name(TokenRole role) {
  switch (role) {
    case TokenRole::atomic: return "atomic";
    case TokenRole::composite: return "composite";
    case TokenRole::filler: return "filler";
    case TokenRole::null: return "null";
  }
  return "filler";
}

TokenRole parse_role(std::string_view name) {
  if (name == "atomic") return TokenRole::atomic;
  if (name == "composite") return TokenRole::composite;
  if (name == "filler") return TokenRole::filler;
  if (name == "null") return TokenRole::null;
  throw ValidationError("unknown token role '" + std::string(name) + "'");
}

namespace {

std::string hash_table(const Matrix& table) {
  Sha256 h;
  for (Eigen::Index tok = 0; tok < table.cols(); ++tok) {
    for (Eigen::Index k = 0; k < table.rows(); ++k) {
      auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(table(k, tok)));
      std::uint8_t le[4] = {static_cast<std::uint8_t>(bits), static_cast<std::uint8_t>(bits >> 8),
                            static_cast<std::uint8_t>(bits >> 16), static_cast<std::uint8_t>(bits >> 24)};
      h.update(std::span<const std::uint8_t>(le, 4));
    }
  }
  return to_hex(h.finish());
}

std::string filler_name(std::size_t index) {
  static constexpr const char* kOnsets[] = {"b", "d", "f", "k", "l", "m", "n", "p", "r", "s", "t", "v"};
  static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};
  std::string name;
  std::size_t x = index;
  for (int syl = 0; syl < 2; ++syl) {
    name += kOnsets[x % 12];
    x /= 12;
    name += kVowels[x % 5];
    x /= 5;
  }
  return name + std::to_string(index);
}

}  // namespace

Vocabulary::Vocabulary(Matrix embeddings, std::vector<std::string> tokens, std::vector<TokenRole> roles)
    : table_(std::move(embeddings)), tokens_(std::move(tokens)), roles_(std::move(roles)) {
  require(static_cast<std::size_t>(table_.cols()) == tokens_.size() && tokens_.size() == roles_.size(),
          "vocabulary: embeddings, tokens and roles disagree in length");
  require(table_.rows() > 0 && table_.cols() > 0, "vocabulary: empty table");
  require(table_.allFinite(), "vocabulary: non-finite embedding entry");
  int nulls = 0;
  for (std::size_t i = 0; i < roles_.size(); ++i) {
    if (roles_[i] == TokenRole::null) {
      ++nulls;
      null_id_ = static_cast<TokenId>(i);
    }
  }
  require(nulls == 1, "vocabulary: expected exactly one null token, found " + std::to_string(nulls));
  hash_ = hash_table(table_);
}

Eigen::Ref<const Vector> Vocabulary::embedding(TokenId id) const {
  require(contains(id), "token id " + std::to_string(id) + " out of range");
  return table_.col(id);
}

const std::string& Vocabulary::token(TokenId id) const {
  require(contains(id), "token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

TokenRole Vocabulary::role(TokenId id) const {
  require(contains(id), "token id " + std::to_string(id) + " out of range");
  return roles_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (tokens_[i] == token) return static_cast<TokenId>(i);
  return std::nullopt;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto found = find(token);
  if (!found) throw ValidationError("unknown token '" + std::string(token) + "'", "token");
  return *found;
}

Vocabulary make_default_vocabulary(const VocabularyConfig& config) {
  const std::size_t fixed = 2 + kAtomNames.size() + kConceptNames.size();
  require(config.size >= fixed + 1, "vocabulary size must be at least " + std::to_string(fixed + 1), "size");
  require(config.dim >= 1, "vocabulary dim must be positive", "dim");
  require(config.scale > 0.0, "vocabulary scale must be positive", "scale");

  std::vector<std::string> tokens;
  std::vector<TokenRole> roles;
  tokens.emplace_back(kNullToken);
  roles.push_back(TokenRole::null);
  tokens.emplace_back(kPhotoToken);
  roles.push_back(TokenRole::filler);
  for (auto a : kAtomNames) {
    tokens.emplace_back(a);
    roles.push_back(TokenRole::atomic);
  }
  for (auto c : kConceptNames) {
    tokens.emplace_back(c);
    roles.push_back(TokenRole::composite);
  }
  while (tokens.size() < config.size) {
    tokens.push_back(filler_name(tokens.size()));
    roles.push_back(TokenRole::filler);
  }

  Rng rng(config.seed);
  Matrix table(static_cast<Eigen::Index>(config.dim), static_cast<Eigen::Index>(config.size));
  fill_normal(rng, table);
  table *= config.scale / std::sqrt(static_cast<double>(config.dim));
  table.col(0).setZero();
  round_to_float(table);
  return Vocabulary(std::move(table), std::move(tokens), std::move(roles));
}

Vector encode_prompt(const Vocabulary& vocab, const Prompt& prompt) {
  require(!prompt.token_ids.empty(), "encode_prompt: empty prompt", "prompt");
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(vocab.dim()));
  for (std::size_t pos = 0; pos < prompt.token_ids.size(); ++pos) {
    auto sub = prompt.substitutions.find(pos);
    if (sub != prompt.substitutions.end()) {
      require(static_cast<std::size_t>(sub->second.size()) == vocab.dim(),
              "encode_prompt: substitution has wrong dimension", "prompt");
      sum += sub->second;
    } else {
      sum += vocab.embedding(prompt.token_ids[pos]);
    }
  }
  for (const auto& [pos, _] : prompt.substitutions)
    require(pos < prompt.token_ids.size(), "encode_prompt: substitution position out of range", "prompt");
  return sum / static_cast<double>(prompt.token_ids.size());
}

Prompt pseudo_token_prompt(const Vocabulary& vocab, const Vector& pseudo) {
  Prompt p;
  p.token_ids = {vocab.id(kPhotoToken), vocab.null_id()};
  p.substitutions.emplace(1, pseudo);
  return p;
}

Prompt atom_prompt(const Vocabulary& vocab, const std::vector<TokenId>& atoms) {
  if (atoms.empty()) return null_prompt(vocab);
  Prompt p;
  const TokenId photo = vocab.id(kPhotoToken);
  for (TokenId a : atoms) {
    p.token_ids.push_back(photo);
    p.token_ids.push_back(a);
  }
  return p;
}

Prompt null_prompt(const Vocabulary& vocab) { return Prompt{{vocab.null_id()}, {}}; }

}  // namespace conceptor
