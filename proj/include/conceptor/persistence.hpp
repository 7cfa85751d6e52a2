#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "conceptor/analysis.hpp"
#include "conceptor/conceptor.hpp"
#include "conceptor/image_decomposer.hpp"
#include "conceptor/synthetic.hpp"

namespace conceptor {

using Json = nlohmann::json;

inline constexpr int kJsonSchemaVersion = 1;

/// Sorted keys, no whitespace, shortest round-trip doubles.
std::string canonical_dump(const Json& j);
std::string sha256_hex(std::string_view text);

/// Writes canonical JSON atomically, with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
/// Throws ValidationError naming the path on malformed input.
Json read_json(const std::filesystem::path& path);

/// Adds "format", "schema_version" and a "digest" over the canonical body.
Json seal(Json body, std::string_view format);
/// Verifies format, version and digest; returns the body without them.
Json unseal(const Json& sealed, std::string_view format);

// ---- vocabulary ----
Json vocabulary_to_json(const Vocabulary& vocab);
Vocabulary vocabulary_from_json(const Json& j);

// ---- corpus manifest ----
struct ManifestConcept {
  std::string token;
  std::vector<std::string> atoms;
  std::size_t per_concept = 0;
};

struct CorpusManifest {
  int suite_version = 1;
  std::uint64_t master_seed = 0;
  RenderJitter jitter;
  std::vector<ManifestConcept> concepts;
};

CorpusManifest make_manifest(const std::vector<CompositeConceptSpec>& specs, const Vocabulary& vocab,
                             std::size_t per_concept, std::uint64_t master_seed);
/// Rebuilds the specs named by the manifest against `vocab`.
std::vector<CompositeConceptSpec> manifest_specs(const CorpusManifest& manifest, const Vocabulary& vocab);
Json manifest_to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(const Json& j);

// ---- decomposition ----
Json decomposition_config_to_json(const DecompositionConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
DecompositionConfig decomposition_config_from_json(const Json& j);

Json decomposition_to_json(const Decomposition& dec, const Vocabulary& vocab);
Decomposition decomposition_from_json(const Json& j);

void save_decomposition(const std::filesystem::path& path, const Decomposition& dec, const Vocabulary& vocab);
/// Refuses files whose vocab or subject hash differs from the expected ones.
Decomposition load_decomposition(const std::filesystem::path& path, const std::string& expected_vocab_hash,
                                 const std::string& expected_subject_hash);

// ---- single-image results ----
Json single_image_to_json(const SingleImageResult& result, const Vocabulary& vocab, const std::string& oracle_name);
SingleImageResult single_image_from_json(const Json& j);

// ---- run registry ----
enum class RunKind { subject_train, decompose, single_image, manipulate, study };
std::string_view run_kind_name(RunKind kind);
RunKind parse_run_kind(std::string_view name);

struct RunRecord {
  std::string run_id;
  RunKind kind = RunKind::study;
  Json config = Json::object();
  std::map<std::string, std::string> input_hashes;
  std::map<std::string, std::string> outputs;
  std::string created_at;
  std::string finished_at;
};

/// SHA-256 of canonical {kind, config, inputs}.
std::string compute_run_id(RunKind kind, const Json& config, const std::map<std::string, std::string>& inputs);

Json run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const Json& j);

/// Directory of <run_id>.json files. Records are written once.
class RunRegistry {
 public:
  explicit RunRegistry(std::filesystem::path root);

  /// Fills run_id, writes the record unless one with that id exists, and
  /// returns the stored record.
  RunRecord put(RunRecord record);
  std::optional<RunRecord> get(const std::string& run_id) const;
  std::vector<RunRecord> list() const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

std::string utc_timestamp();

}  // namespace conceptor
