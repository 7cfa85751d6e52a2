#include "conceptor/lab.hpp"

#include <algorithm>

#include "conceptor/png.hpp"
#include "conceptor/sha256.hpp"

namespace conceptor {

namespace fs = std::filesystem;

Json subject_config_to_json(const SubjectConfig& c) {
  return {{"vocab_size", c.vocab.size},
          {"vocab_dim", c.vocab.dim},
          {"vocab_seed", c.vocab.seed},
          {"vocab_scale", c.vocab.scale},
          {"schedule_steps", c.schedule.steps},
          {"beta_start", c.schedule.beta_start},
          {"beta_end", c.schedule.beta_end},
          {"hidden", c.arch.hidden},
          {"time_dim", c.arch.time_dim},
          {"residual_layers", c.arch.residual_layers},
          {"signal_scale", c.arch.signal_scale},
          {"train_steps", c.training.steps},
          {"train_batch", c.training.batch},
          {"train_lr", c.training.lr},
          {"lr_floor", c.training.lr_floor},
          {"p_uncond", c.training.p_uncond},
          {"p_attribute_drop", c.training.p_attribute_drop},
          {"snr_weight_min", c.training.snr_weight_min},
          {"snr_weight_max", c.training.snr_weight_max},
          {"train_seed", c.training.seed},
          {"images_per_combo", c.images_per_combo},
          {"corpus_seed", c.corpus_seed},
          {"init_seed", c.init_seed}};
}

SubjectConfig subject_config_from_json(const Json& j) {
  require(j.is_object(), "subject config must be a JSON object", "config");
  SubjectConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "vocab_size") c.vocab.size = v.get<std::size_t>();
      else if (key == "vocab_dim") c.vocab.dim = v.get<std::size_t>();
      else if (key == "vocab_seed") c.vocab.seed = v.get<std::uint64_t>();
      else if (key == "vocab_scale") c.vocab.scale = v.get<double>();
      else if (key == "schedule_steps") c.schedule.steps = v.get<int>();
      else if (key == "beta_start") c.schedule.beta_start = v.get<double>();
      else if (key == "beta_end") c.schedule.beta_end = v.get<double>();
      else if (key == "hidden") c.arch.hidden = v.get<Eigen::Index>();
      else if (key == "time_dim") c.arch.time_dim = v.get<Eigen::Index>();
      else if (key == "residual_layers") c.arch.residual_layers = v.get<int>();
      else if (key == "signal_scale") c.arch.signal_scale = v.get<double>();
      else if (key == "train_steps") c.training.steps = v.get<int>();
      else if (key == "train_batch") c.training.batch = v.get<int>();
      else if (key == "train_lr") c.training.lr = v.get<double>();
      else if (key == "lr_floor") c.training.lr_floor = v.get<double>();
      else if (key == "p_uncond") c.training.p_uncond = v.get<double>();
      else if (key == "p_attribute_drop") c.training.p_attribute_drop = v.get<double>();
      else if (key == "snr_weight_min") c.training.snr_weight_min = v.get<double>();
      else if (key == "snr_weight_max") c.training.snr_weight_max = v.get<double>();
      else if (key == "train_seed") c.training.seed = v.get<std::uint64_t>();
      else if (key == "images_per_combo") c.images_per_combo = v.get<std::size_t>();
      else if (key == "corpus_seed") c.corpus_seed = v.get<std::uint64_t>();
      else if (key == "init_seed") c.init_seed = v.get<std::uint64_t>();
      else throw ValidationError("unknown subject config key '" + key + "'", key);
    } catch (const Json::exception& e) {
      throw ValidationError("bad value for '" + key + "': " + e.what(), key);
    }
  }
  return c;
}

std::vector<ImageSample> subject_corpus(const Vocabulary& vocab, const SubjectConfig& config) {
  return build_corpus(atom_grid(vocab), config.images_per_combo, config.corpus_seed);
}

SubjectBundle train_subject_bundle(const SubjectConfig& config, SubjectTrainingLog* log,
                                   const std::function<void(int, double)>& progress) {
  Vocabulary vocab = make_default_vocabulary(config.vocab);
  NoiseSchedule sched = make_linear_schedule(config.schedule);
  DenoiserArch arch = config.arch;
  arch.cond_dim = static_cast<Eigen::Index>(vocab.dim());
  arch.max_t = sched.steps();
  arch.alpha_bar = sched.alpha_bars();
  MlpDenoiser model = train_subject(MlpDenoiser::initialize(arch, config.init_seed), subject_corpus(vocab, config),
                                    vocab, sched, config.training, log, progress);
  return SubjectBundle{std::move(vocab), std::move(sched), std::move(model)};
}

namespace {

constexpr std::size_t kTrainBase = 1'000'000;
constexpr std::size_t kRunStride = 10'000;
constexpr std::size_t kValidationBase = 2'000'000;
constexpr std::size_t kTestBase = 3'000'000;

}  // namespace

std::vector<Image> concept_images(const CompositeConceptSpec& spec, std::size_t concept_index, CorpusSplit split,
                                  const ConceptCorpusPlan& plan, std::size_t run) {
  std::size_t base = 0, count = 0;
  switch (split) {
    case CorpusSplit::train:
      require(plan.train_count <= kRunStride, "train_count too large", "train_count");
      base = kTrainBase + run * kRunStride;
      count = plan.train_count;
      break;
    case CorpusSplit::validation:
      base = kValidationBase + run * kRunStride;
      count = plan.validation_count;
      break;
    case CorpusSplit::test:
      base = kTestBase;
      count = plan.test_count;
      break;
  }
  require(run < 100, "robustness run index too large", "runs");
  std::vector<Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(render_image(spec, corpus_seed(plan.master_seed, concept_index, base + i)).pixels);
  return out;
}

std::size_t suite_index(const Vocabulary& vocab, const std::string& concept_name) {
  const auto suite = default_concept_suite(vocab);
  for (std::size_t i = 0; i < suite.size(); ++i)
    if (vocab.token(suite[i].concept_token_id()) == concept_name) return i;
  throw ValidationError("unknown concept '" + concept_name + "'", "concept");
}

ConceptCorpus suite_corpus(const Vocabulary& vocab, const std::string& concept_name, const ConceptCorpusPlan& plan,
                           std::size_t run) {
  const std::size_t index = suite_index(vocab, concept_name);
  const auto spec = default_concept_suite(vocab)[index];
  ConceptCorpus corpus;
  corpus.concept_name = concept_name;
  corpus.concept_token_id = spec.concept_token_id();
  corpus.train = concept_images(spec, index, CorpusSplit::train, plan, run);
  corpus.validation = concept_images(spec, index, CorpusSplit::validation, plan, run);
  return corpus;
}

int atoms_in_top_k(const Decomposition& dec, const CompositeConceptSpec& spec, std::size_t k) {
  const auto atoms = spec.atom_tokens();
  int hits = 0;
  for (std::size_t i = 0; i < std::min(k, dec.ranked.size()); ++i)
    hits += static_cast<int>(std::count(atoms.begin(), atoms.end(), dec.ranked[i].token_id));
  return hits;
}

Json decompose_run_config(const std::string& concept_name, const DecompositionConfig& config,
                          const ConceptCorpusPlan& plan) {
  return {{"concept", concept_name},
          {"decomposition", decomposition_config_to_json(config)},
          {"corpus",
           {{"master_seed", plan.master_seed},
            {"train_count", plan.train_count},
            {"validation_count", plan.validation_count}}}};
}

std::string decomposition_id(const std::string& concept_name, const std::string& run_id) {
  return concept_name + "-" + run_id.substr(0, 12);
}

StoredDecomposition decompose_and_store(const Workspace& ws, const SubjectBundle& bundle,
                                        const std::string& concept_name, const DecompositionConfig& config,
                                        const ConceptCorpusPlan& plan, const SimilarityOracle& oracle,
                                        const ProgressFn& progress) {
  validate_decomposition_config(config, bundle.vocab);
  const ConceptCorpus corpus = suite_corpus(bundle.vocab, concept_name, plan);
  RunRecord record;
  record.kind = RunKind::decompose;
  record.config = decompose_run_config(concept_name, config, plan);
  record.input_hashes = {{"subject", bundle.model.weights_hash()}, {"vocab", bundle.vocab.version_hash()}};
  record.created_at = utc_timestamp();
  const std::string run_id = compute_run_id(record.kind, record.config, record.input_hashes);

  StoredDecomposition out;
  out.decomposition = train_decomposition(bundle.model, bundle.schedule, bundle.vocab, corpus, config, oracle, progress);
  out.run_id = run_id;
  out.id = decomposition_id(concept_name, run_id);
  out.path = ws.decomposition_file(out.id);
  fs::create_directories(ws.decompositions());
  save_decomposition(out.path, out.decomposition, bundle.vocab);
  record.outputs = {{"decomposition", fs::relative(out.path, ws.root).generic_string()}};
  record.finished_at = utc_timestamp();
  RunRegistry(ws.registry()).put(record);
  return out;
}

Decomposition load_workspace_decomposition(const Workspace& ws, const SubjectBundle& bundle,
                                           const std::string& id_or_path) {
  fs::path path = id_or_path;
  if (!fs::exists(path)) path = ws.decomposition_file(id_or_path);
  if (!fs::exists(path)) throw ValidationError("no decomposition '" + id_or_path + "'", "decomposition");
  return load_decomposition(path, bundle.vocab.version_hash(), bundle.model.weights_hash());
}

std::string save_image_addressed(const fs::path& dir, const Image& image) {
  const auto bytes = encode_png(to_raster(image));
  const std::string hash = to_hex(sha256(bytes));
  const fs::path path = dir / (hash + ".png");
  if (!fs::exists(path)) {
    fs::create_directories(dir);
    write_file_atomic(path, bytes);
  }
  return hash;
}

}  // namespace conceptor
