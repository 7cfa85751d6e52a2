#include "conceptor/persistence.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "conceptor/png.hpp"
#include "conceptor/sha256.hpp"

namespace conceptor {

namespace fs = std::filesystem;

std::string canonical_dump(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::strict); }

std::string sha256_hex(std::string_view text) { return to_hex(sha256(text)); }

void write_json(const fs::path& path, const Json& j) { write_file_atomic(path, canonical_dump(j) + "\n"); }

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string(), "path");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what(), "path");
  }
}

Json seal(Json body, std::string_view format) {
  body["format"] = std::string(format);
  body["schema_version"] = kJsonSchemaVersion;
  body.erase("digest");
  const std::string digest = sha256_hex(canonical_dump(body));
  body["digest"] = digest;
  return body;
}

Json unseal(const Json& sealed, std::string_view format) {
  if (!sealed.is_object()) throw IntegrityError("expected a JSON object of format '" + std::string(format) + "'");
  const std::string found_format = sealed.value("format", std::string("<missing>"));
  if (found_format != format)
    throw IntegrityError("format mismatch: expected '" + std::string(format) + "', found '" + found_format + "'");
  const int version = sealed.value("schema_version", -1);
  if (version != kJsonSchemaVersion)
    throw IntegrityError("schema version mismatch: expected " + std::to_string(kJsonSchemaVersion) + ", found " +
                         std::to_string(version));
  Json body = sealed;
  const std::string found = body.value("digest", std::string("<missing>"));
  body.erase("digest");
  const std::string expected = sha256_hex(canonical_dump(body));
  if (found != expected) throw IntegrityError("digest mismatch: expected " + expected + ", found " + found);
  body.erase("format");
  body.erase("schema_version");
  return body;
}

namespace {

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'", key);
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("bad field '") + key + "': " + e.what(), key);
  }
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const Json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace

// ---- vocabulary ----

Json vocabulary_to_json(const Vocabulary& vocab) {
  Json tokens = Json::array();
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    tokens.push_back(
        {{"token", vocab.token(id)}, {"role", role_name(vocab.role(id))}, {"embedding", vector_to_json(vocab.embedding(id))}});
  }
  return seal({{"dim", vocab.dim()}, {"version_hash", vocab.version_hash()}, {"tokens", tokens}}, "conceptor.vocabulary");
}

Vocabulary vocabulary_from_json(const Json& sealed) {
  const Json j = unseal(sealed, "conceptor.vocabulary");
  const auto dim = field<std::size_t>(j, "dim");
  const auto& tokens = j.at("tokens");
  Matrix table(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(tokens.size()));
  std::vector<std::string> names;
  std::vector<TokenRole> roles;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Vector e = vector_from_json(tokens[i].at("embedding"));
    require(static_cast<std::size_t>(e.size()) == dim, "vocabulary embedding has wrong dimension", "embedding");
    table.col(static_cast<Eigen::Index>(i)) = e;
    names.push_back(field<std::string>(tokens[i], "token"));
    roles.push_back(parse_role(field<std::string>(tokens[i], "role")));
  }
  Vocabulary vocab(std::move(table), std::move(names), std::move(roles));
  const auto expected = field<std::string>(j, "version_hash");
  if (vocab.version_hash() != expected)
    throw IntegrityError("vocabulary hash mismatch: expected " + expected + ", found " + vocab.version_hash());
  return vocab;
}

// ---- corpus manifest ----

CorpusManifest make_manifest(const std::vector<CompositeConceptSpec>& specs, const Vocabulary& vocab,
                             std::size_t per_concept, std::uint64_t master_seed) {
  require(!specs.empty(), "manifest needs at least one concept", "concepts");
  CorpusManifest m;
  m.master_seed = master_seed;
  m.jitter = specs.front().jitter();
  for (const auto& s : specs) {
    ManifestConcept c;
    c.token = vocab.token(s.concept_token_id());
    for (const auto& a : s.atoms()) c.atoms.emplace_back(a.name());
    c.per_concept = per_concept;
    m.concepts.push_back(std::move(c));
  }
  return m;
}

std::vector<CompositeConceptSpec> manifest_specs(const CorpusManifest& manifest, const Vocabulary& vocab) {
  std::vector<CompositeConceptSpec> out;
  for (const auto& c : manifest.concepts) {
    require(c.atoms.size() == 3, "manifest concept '" + c.token + "' needs 3 atoms", "atoms");
    std::array<AttributeAtom, 3> atoms{};
    for (const auto& name : c.atoms) {
      const auto parsed = parse_atom(name);
      require(parsed.has_value(), "unknown atom '" + name + "'", "atoms");
      atoms[static_cast<std::size_t>(parsed->first)] = AttributeAtom{parsed->first, parsed->second, vocab.id(name)};
    }
    out.emplace_back(vocab.id(c.token), atoms, manifest.jitter);
  }
  return out;
}

Json manifest_to_json(const CorpusManifest& m) {
  Json concepts = Json::array();
  for (const auto& c : m.concepts)
    concepts.push_back({{"token", c.token}, {"atoms", c.atoms}, {"per_concept", c.per_concept}});
  return seal({{"suite_version", m.suite_version},
               {"master_seed", m.master_seed},
               {"jitter",
                {{"position_px", m.jitter.position_px},
                 {"scale", m.jitter.scale},
                 {"rotation_rad", m.jitter.rotation_rad},
                 {"pixel_noise", m.jitter.pixel_noise}}},
               {"concepts", concepts}},
              "conceptor.corpus_manifest");
}

CorpusManifest manifest_from_json(const Json& sealed) {
  const Json j = unseal(sealed, "conceptor.corpus_manifest");
  CorpusManifest m;
  m.suite_version = field<int>(j, "suite_version");
  m.master_seed = field<std::uint64_t>(j, "master_seed");
  const auto& jit = j.at("jitter");
  m.jitter = {field<double>(jit, "position_px"), field<double>(jit, "scale"), field<double>(jit, "rotation_rad"),
              field<double>(jit, "pixel_noise")};
  for (const auto& c : j.at("concepts"))
    m.concepts.push_back({field<std::string>(c, "token"), field<std::vector<std::string>>(c, "atoms"),
                          field<std::size_t>(c, "per_concept")});
  return m;
}

// ---- decomposition ----

Json decomposition_config_to_json(const DecompositionConfig& c) {
  return {{"n", c.n},
          {"lambda_sparsity", c.lambda_sparsity},
          {"lr", c.lr},
          {"max_steps", c.max_steps},
          {"batch", c.batch},
          {"val_every", c.val_every},
          {"val_count", c.val_count},
          {"seed", c.seed},
          {"val_seed", c.val_seed},
          {"hidden", c.hidden},
          {"init_scale", c.init_scale},
          {"nonnegative_init", c.nonnegative_init},
          {"top_m", c.top_m},
          {"guidance_scale", c.guidance_scale},
          {"sampler_steps", c.sampler_steps}};
}

DecompositionConfig decomposition_config_from_json(const Json& j) {
  require(j.is_object(), "decomposition config must be an object", "config");
  DecompositionConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "n") c.n = value.get<int>();
      else if (key == "lambda_sparsity") c.lambda_sparsity = value.get<double>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "max_steps") c.max_steps = value.get<int>();
      else if (key == "batch") c.batch = value.get<int>();
      else if (key == "val_every") c.val_every = value.get<int>();
      else if (key == "val_count") c.val_count = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "val_seed") c.val_seed = value.get<std::uint64_t>();
      else if (key == "hidden") c.hidden = value.get<int>();
      else if (key == "init_scale") c.init_scale = value.get<double>();
      else if (key == "nonnegative_init") c.nonnegative_init = value.get<bool>();
      else if (key == "top_m") c.top_m = value.get<int>();
      else if (key == "guidance_scale") c.guidance_scale = value.get<double>();
      else if (key == "sampler_steps") c.sampler_steps = value.get<int>();
      else throw ValidationError("unknown decomposition config key '" + key + "'", key);
    } catch (const Json::exception& e) {
      throw ValidationError("bad value for '" + key + "': " + e.what(), key);
    }
  }
  return c;
}

Json decomposition_to_json(const Decomposition& dec, const Vocabulary& vocab) {
  Json ranked = Json::array();
  for (const auto& r : dec.ranked)
    ranked.push_back({{"token_id", r.token_id}, {"token", vocab.token(r.token_id)}, {"coefficient", r.coefficient}});
  Json w1 = Json::array();
  for (Eigen::Index i = 0; i < dec.mlp.w1.rows(); ++i) w1.push_back(vector_to_json(dec.mlp.w1.row(i).transpose()));
  Json steps = Json::array();
  for (const auto& s : dec.log.steps) steps.push_back({s.step, s.reconstruction, s.sparsity, s.total});
  Json vals = Json::array();
  for (const auto& v : dec.log.validations) vals.push_back({v.step, v.score});
  return seal({{"concept", dec.concept_name},
               {"concept_token_id", dec.concept_token_id},
               {"vocab_hash", dec.vocab_hash},
               {"subject_hash", dec.subject_hash},
               {"n", dec.n},
               {"lambda_sparsity", dec.lambda_sparsity},
               {"candidates", dec.candidate_ids},
               {"ranked", ranked},
               {"w_star", vector_to_json(dec.w_star)},
               {"w_star_full", vector_to_json(dec.w_star_full)},
               {"mlp", {{"w1", w1}, {"w2", vector_to_json(dec.mlp.w2.transpose())}}},
               {"config", decomposition_config_to_json(dec.config)},
               {"seed", dec.seed},
               {"log",
                {{"steps", steps},
                 {"step_columns", {"step", "reconstruction", "sparsity", "total"}},
                 {"validations", vals},
                 {"selected_step", dec.log.selected_step}}},
               {"provenance", dec.provenance}},
              "conceptor.decomposition");
}

Decomposition decomposition_from_json(const Json& sealed) {
  const Json j = unseal(sealed, "conceptor.decomposition");
  Decomposition dec;
  dec.concept_name = field<std::string>(j, "concept");
  dec.concept_token_id = field<TokenId>(j, "concept_token_id");
  dec.vocab_hash = field<std::string>(j, "vocab_hash");
  dec.subject_hash = field<std::string>(j, "subject_hash");
  dec.n = field<int>(j, "n");
  dec.lambda_sparsity = field<double>(j, "lambda_sparsity");
  dec.candidate_ids = field<std::vector<TokenId>>(j, "candidates");
  for (const auto& r : j.at("ranked"))
    dec.ranked.push_back({field<TokenId>(r, "token_id"), field<double>(r, "coefficient")});
  dec.w_star = vector_from_json(j.at("w_star"));
  dec.w_star_full = vector_from_json(j.at("w_star_full"));
  const auto& w1 = j.at("mlp").at("w1");
  const Vector w2 = vector_from_json(j.at("mlp").at("w2"));
  dec.mlp.w2 = w2.transpose();
  dec.mlp.w1.resize(static_cast<Eigen::Index>(w1.size()), w1.empty() ? 0 : static_cast<Eigen::Index>(w1[0].size()));
  for (std::size_t i = 0; i < w1.size(); ++i) {
    const Vector row = vector_from_json(w1[i]);
    require(row.size() == dec.mlp.w1.cols(), "ragged mlp.w1", "mlp");
    dec.mlp.w1.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  require(dec.mlp.w2.size() == dec.mlp.w1.rows(), "mlp.w2 length does not match mlp.w1", "mlp");
  dec.config = decomposition_config_from_json(j.at("config"));
  dec.seed = field<std::uint64_t>(j, "seed");
  const auto& log = j.at("log");
  for (const auto& s : log.at("steps"))
    dec.log.steps.push_back({s.at(0).get<int>(), s.at(1).get<double>(), s.at(2).get<double>(), s.at(3).get<double>()});
  for (const auto& v : log.at("validations")) dec.log.validations.push_back({v.at(0).get<int>(), v.at(1).get<double>()});
  dec.log.selected_step = field<int>(log, "selected_step");
  dec.provenance = field<std::vector<std::string>>(j, "provenance");
  return dec;
}

void save_decomposition(const fs::path& path, const Decomposition& dec, const Vocabulary& vocab) {
  write_json(path, decomposition_to_json(dec, vocab));
}

Decomposition load_decomposition(const fs::path& path, const std::string& expected_vocab_hash,
                                 const std::string& expected_subject_hash) {
  Decomposition dec = decomposition_from_json(read_json(path));
  if (dec.vocab_hash != expected_vocab_hash)
    throw IntegrityError("vocab hash mismatch: expected " + expected_vocab_hash + ", found " + dec.vocab_hash);
  if (dec.subject_hash != expected_subject_hash)
    throw IntegrityError("subject hash mismatch: expected " + expected_subject_hash + ", found " + dec.subject_hash);
  return dec;
}

// ---- single-image results ----

Json single_image_to_json(const SingleImageResult& r, const Vocabulary& vocab, const std::string& oracle_name) {
  Json surviving = Json::array();
  for (const auto& t : r.surviving)
    surviving.push_back({{"token_id", t.token_id}, {"token", vocab.token(t.token_id)}, {"coefficient", t.coefficient}});
  Json trace = Json::array();
  for (const auto& e : r.trace)
    trace.push_back({{"token_id", e.token_id}, {"pass", e.pass}, {"similarity", e.similarity}, {"removed", e.removed}});
  return seal({{"seed", r.seed},
               {"tau", r.tau},
               {"order", removal_order_name(r.order)},
               {"surviving", surviving},
               {"trace", trace},
               {"final_image_matches", r.final_image_matches},
               {"final_similarity", r.final_similarity},
               {"oracle", oracle_name},
               {"calibration_note", "tau is applied to the " + oracle_name +
                                        " image-similarity oracle on [0, 1], not to a calibrated semantic score"}},
              "conceptor.single_image");
}

SingleImageResult single_image_from_json(const Json& sealed) {
  const Json j = unseal(sealed, "conceptor.single_image");
  SingleImageResult r;
  r.seed = field<std::uint64_t>(j, "seed");
  r.tau = field<double>(j, "tau");
  r.order = parse_removal_order(field<std::string>(j, "order"));
  for (const auto& t : j.at("surviving")) r.surviving.push_back({field<TokenId>(t, "token_id"), field<double>(t, "coefficient")});
  for (const auto& e : j.at("trace"))
    r.trace.push_back({field<TokenId>(e, "token_id"), field<double>(e, "similarity"), field<bool>(e, "removed"),
                       field<int>(e, "pass")});
  r.final_image_matches = field<bool>(j, "final_image_matches");
  r.final_similarity = field<double>(j, "final_similarity");
  return r;
}

// ---- run registry ----

std::string_view run_kind_name(RunKind kind) {
  switch (kind) {
    case RunKind::subject_train: return "subject_train";
    case RunKind::decompose: return "decompose";
    case RunKind::single_image: return "single_image";
    case RunKind::manipulate: return "manipulate";
    case RunKind::study: return "study";
  }
  return "study";
}

RunKind parse_run_kind(std::string_view name) {
  for (RunKind k : {RunKind::subject_train, RunKind::decompose, RunKind::single_image, RunKind::manipulate,
                    RunKind::study})
    if (run_kind_name(k) == name) return k;
  throw ValidationError("unknown run kind '" + std::string(name) + "'", "kind");
}

std::string compute_run_id(RunKind kind, const Json& config, const std::map<std::string, std::string>& inputs) {
  return sha256_hex(canonical_dump({{"kind", run_kind_name(kind)}, {"config", config}, {"inputs", inputs}}));
}

Json run_record_to_json(const RunRecord& r) {
  return seal({{"run_id", r.run_id},
               {"kind", run_kind_name(r.kind)},
               {"config", r.config},
               {"input_hashes", r.input_hashes},
               {"outputs", r.outputs},
               {"created_at", r.created_at},
               {"finished_at", r.finished_at}},
              "conceptor.run_record");
}

RunRecord run_record_from_json(const Json& sealed) {
  const Json j = unseal(sealed, "conceptor.run_record");
  RunRecord r;
  r.run_id = field<std::string>(j, "run_id");
  r.kind = parse_run_kind(field<std::string>(j, "kind"));
  r.config = j.at("config");
  r.input_hashes = field<std::map<std::string, std::string>>(j, "input_hashes");
  r.outputs = field<std::map<std::string, std::string>>(j, "outputs");
  r.created_at = field<std::string>(j, "created_at");
  r.finished_at = field<std::string>(j, "finished_at");
  const std::string expected = compute_run_id(r.kind, r.config, r.input_hashes);
  if (expected != r.run_id) throw IntegrityError("run id mismatch: expected " + expected + ", found " + r.run_id);
  return r;
}

RunRegistry::RunRegistry(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

RunRecord RunRegistry::put(RunRecord record) {
  record.run_id = compute_run_id(record.kind, record.config, record.input_hashes);
  if (auto existing = get(record.run_id)) return *existing;
  write_json(root_ / (record.run_id + ".json"), run_record_to_json(record));
  return record;
}

std::optional<RunRecord> RunRegistry::get(const std::string& run_id) const {
  const fs::path path = root_ / (run_id + ".json");
  if (!fs::exists(path)) return std::nullopt;
  return run_record_from_json(read_json(path));
}

std::vector<RunRecord> RunRegistry::list() const {
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(root_))
    if (entry.path().extension() == ".json") paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  std::vector<RunRecord> out;
  for (const auto& p : paths) out.push_back(run_record_from_json(read_json(p)));
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace conceptor
