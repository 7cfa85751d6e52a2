#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "conceptor/checkpoint.hpp"
#include "conceptor/persistence.hpp"
#include "conceptor/subject_training.hpp"

namespace conceptor {

/// Everything that determines the trained subject.
struct SubjectConfig {
  VocabularyConfig vocab;
  ScheduleConfig schedule;
  DenoiserArch arch;
  SubjectTrainingConfig training;
  std::size_t images_per_combo = 16;
  std::uint64_t corpus_seed = 7;
  std::uint64_t init_seed = 0;
};

/// Flat JSON mirroring every field; unknown keys are rejected.
Json subject_config_to_json(const SubjectConfig& config);
SubjectConfig subject_config_from_json(const Json& j);

/// Subject training corpus: every shape x color x texture combination.
std::vector<ImageSample> subject_corpus(const Vocabulary& vocab, const SubjectConfig& config);

/// Builds the vocabulary and schedule, trains the denoiser on the atom grid.
SubjectBundle train_subject_bundle(const SubjectConfig& config, SubjectTrainingLog* log = nullptr,
                                   const std::function<void(int, double)>& progress = {});

/// Seeds of the concept images. Every split draws from its own index range,
/// so splits and robustness runs never share an image.
struct ConceptCorpusPlan {
  std::uint64_t master_seed = 11;
  std::size_t train_count = 100;
  std::size_t validation_count = 20;
  std::size_t test_count = 20;
};

enum class CorpusSplit { train, validation, test };

std::vector<Image> concept_images(const CompositeConceptSpec& spec, std::size_t concept_index, CorpusSplit split,
                                  const ConceptCorpusPlan& plan, std::size_t run = 0);

/// Index of `concept_name` in the default suite; throws ValidationError
/// naming "concept" otherwise.
std::size_t suite_index(const Vocabulary& vocab, const std::string& concept_name);

/// Train and validation images of one suite concept for robustness run `run`.
ConceptCorpus suite_corpus(const Vocabulary& vocab, const std::string& concept_name, const ConceptCorpusPlan& plan,
                           std::size_t run = 0);

/// Number of the concept's atoms among the first k ranked tokens.
int atoms_in_top_k(const Decomposition& dec, const CompositeConceptSpec& spec, std::size_t k);

/// On-disk layout of a lab directory.
struct Workspace {
  std::filesystem::path root;

  explicit Workspace(std::filesystem::path r) : root(std::move(r)) {}
  std::filesystem::path checkpoint() const { return root / "subject.ckpt"; }
  std::filesystem::path subject_config() const { return root / "subject_config.json"; }
  std::filesystem::path manifest() const { return root / "data" / "manifest.json"; }
  std::filesystem::path data_images() const { return root / "data" / "images"; }
  std::filesystem::path decompositions() const { return root / "decompositions"; }
  std::filesystem::path images() const { return root / "images"; }
  std::filesystem::path registry() const { return root / "registry"; }
  std::filesystem::path decomposition_file(const std::string& id) const {
    return decompositions() / (id + ".json");
  }
};

struct StoredDecomposition {
  std::string id;
  std::filesystem::path path;
  std::string run_id;
  Decomposition decomposition;
};

/// Run-registry configuration of a decomposition run.
Json decompose_run_config(const std::string& concept_name, const DecompositionConfig& config,
                          const ConceptCorpusPlan& plan);

/// "<concept>-<first 12 hex of run_id>".
std::string decomposition_id(const std::string& concept_name, const std::string& run_id);

/// Trains a decomposition of a suite concept, writes it under the
/// workspace's decompositions directory and registers the run.
StoredDecomposition decompose_and_store(const Workspace& ws, const SubjectBundle& bundle,
                                        const std::string& concept_name, const DecompositionConfig& config,
                                        const ConceptCorpusPlan& plan, const SimilarityOracle& oracle,
                                        const ProgressFn& progress = {});

/// Loads a decomposition by id or path, refusing files from another subject.
Decomposition load_workspace_decomposition(const Workspace& ws, const SubjectBundle& bundle,
                                           const std::string& id_or_path);

/// Saves an image as <sha256 of PNG bytes>.png under `dir`; returns the hash.
std::string save_image_addressed(const std::filesystem::path& dir, const Image& image);

}  // namespace conceptor
