#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conceptor/common.hpp"

namespace conceptor {

enum class TokenRole { atomic, composite, filler, null };

std::string_view role_name(TokenRole role);
TokenRole parse_role(std::string_view name);

/// Frozen token-embedding table. Embeddings are stored one token per column.
class Vocabulary {
 public:
  /// `embeddings` is d x N (column per token). Throws ValidationError if any
  /// entry is non-finite or the table does not contain exactly one null token.
  Vocabulary(Matrix embeddings, std::vector<std::string> tokens, std::vector<TokenRole> roles);

  std::size_t size() const { return tokens_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(table_.rows()); }

  const Matrix& table() const { return table_; }
  Eigen::Ref<const Vector> embedding(TokenId id) const;
  const std::string& token(TokenId id) const;
  TokenRole role(TokenId id) const;

  std::optional<TokenId> find(std::string_view token) const;
  /// Throws ValidationError naming the token if absent.
  TokenId id(std::string_view token) const;
  TokenId null_id() const { return null_id_; }
  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < size(); }

  /// SHA-256 (hex) of the embedding matrix as row-major little-endian float32.
  const std::string& version_hash() const { return hash_; }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<TokenRole>& roles() const { return roles_; }

 private:
  Matrix table_;
  std::vector<std::string> tokens_;
  std::vector<TokenRole> roles_;
  TokenId null_id_ = -1;
  std::string hash_;
};

struct VocabularyConfig {
  std::size_t size = 64;
  std::size_t dim = 64;
  std::uint64_t seed = 0;
  /// Embedding entries are N(0, scale^2 / d).
  double scale = 8.0;
};

/// Layout: null, photo, the 12 atoms, the 5 suite concepts, then fillers.
/// The null row is zero; every other row is N(0, scale^2/d) rounded to float32.
Vocabulary make_default_vocabulary(const VocabularyConfig& config);

/// A token-id prompt, optionally with raw vectors injected at positions.
struct Prompt {
  std::vector<TokenId> token_ids;
  std::map<std::size_t, Vector> substitutions;
};

/// Mean of the prompt's token embeddings, substituted vectors replacing the
/// table rows at their positions.
Vector encode_prompt(const Vocabulary& vocab, const Prompt& prompt);

/// "a photo of a <pseudo>": [photo, pseudo].
Prompt pseudo_token_prompt(const Vocabulary& vocab, const Vector& pseudo);

/// One "a photo of <atom>" clause per atom: [photo, a1, photo, a2, ...].
/// An empty atom list yields the null prompt.
Prompt atom_prompt(const Vocabulary& vocab, const std::vector<TokenId>& atoms);

Prompt null_prompt(const Vocabulary& vocab);

}  // namespace conceptor
