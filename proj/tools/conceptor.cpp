#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>

#include "conceptor/lab.hpp"
#include "conceptor/png.hpp"
#include "conceptor/report.hpp"
#include "conceptor/service.hpp"

namespace fs = std::filesystem;
using namespace conceptor;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--config", c.config, "Flat JSON config file");
  cmd->add_option("--out", c.out, "Output directory");
}

Json config_json(const Common& c) { return c.config.empty() ? Json::object() : read_json(c.config); }

fs::path out_dir(const Common& c, const fs::path& fallback) {
  const fs::path dir = c.out.empty() ? fallback : fs::path(c.out);
  fs::create_directories(dir);
  return dir;
}

SubjectBundle load_subject(const Workspace& ws) {
  if (!fs::exists(ws.checkpoint()))
    throw ValidationError("no subject checkpoint at " + ws.checkpoint().string() + "; run train-subject first",
                          "workspace");
  return load_checkpoint(ws.checkpoint());
}

void progress_line(const std::string& label, double fraction) {
  std::fprintf(stderr, "\r%s %5.1f%%", label.c_str(), 100.0 * fraction);
  if (fraction >= 1.0) std::fputc('\n', stderr);
  std::fflush(stderr);
}

void write_png(const fs::path& path, const Image& image) { write_file_atomic(path, encode_png(to_raster(image))); }

std::vector<std::string> suite_names(const Vocabulary& vocab) {
  std::vector<std::string> names;
  for (const auto& spec : default_concept_suite(vocab)) names.push_back(vocab.token(spec.concept_token_id()));
  return names;
}

std::map<TokenId, double> parse_edits(const Vocabulary& vocab, const std::vector<std::string>& edits,
                                      const std::vector<std::string>& tokens, std::optional<double> scale) {
  std::map<TokenId, double> out;
  for (const auto& e : edits) {
    const auto eq = e.find('=');
    require(eq != std::string::npos, "edit '" + e + "' must be token=scale", "edit");
    double v = 0.0;
    try {
      v = std::stod(e.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("edit '" + e + "' has a bad scale", "edit");
    }
    out[vocab.id(e.substr(0, eq))] = v;
  }
  if (!tokens.empty()) require(scale.has_value(), "--token needs --scale", "scale");
  for (const auto& t : tokens) out[vocab.id(t)] = *scale;
  return out;
}

struct DecomposeFlags {
  std::optional<int> n;
  std::optional<double> lambda;
  std::optional<int> steps;
  std::optional<double> lr;
};

void add_decompose_flags(CLI::App* cmd, DecomposeFlags& f) {
  cmd->add_option("--n", f.n, "Number of tokens kept");
  cmd->add_option("--lambda", f.lambda, "Sparsity weight");
  cmd->add_option("--steps", f.steps, "Training steps");
  cmd->add_option("--lr", f.lr, "Learning rate");
}

DecompositionConfig decomposition_config(const Common& c, const DecomposeFlags& f) {
  DecompositionConfig cfg = decomposition_config_from_json(config_json(c));
  if (c.seed) cfg.seed = *c.seed;
  if (f.n) cfg.n = *f.n;
  if (f.lambda) cfg.lambda_sparsity = *f.lambda;
  if (f.steps) cfg.max_steps = *f.steps;
  if (f.lr) cfg.lr = *f.lr;
  return cfg;
}

void print_ranked(const Decomposition& dec, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < dec.ranked.size(); ++i)
    std::printf("%zu %s %s\n", i + 1, vocab.token(dec.ranked[i].token_id).c_str(),
                format_double(dec.ranked[i].coefficient).c_str());
}

LabService* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept decomposition lab on a toy diffusion subject"};
  app.require_subcommand(1);
  std::string workspace = "lab";
  app.add_option("-w,--workspace", workspace, "Lab directory holding the subject and results");

  // gen-data
  Common gd;
  std::size_t gd_count = 0;
  std::vector<std::string> gd_concepts;
  auto* gen_data = app.add_subcommand("gen-data", "Render the concept image corpus with a manifest");
  add_common(gen_data, gd);
  gen_data->add_option("--count", gd_count, "Images per concept (default: the training split size)");
  gen_data->add_option("--concept", gd_concepts, "Concepts to render (default: the whole suite)");

  // train-subject
  Common ts;
  std::optional<int> ts_steps;
  auto* train_subject_cmd = app.add_subcommand("train-subject", "Train the subject denoiser on the atom grid");
  add_common(train_subject_cmd, ts);
  train_subject_cmd->add_option("--steps", ts_steps, "Training steps");

  // decompose
  Common dc;
  DecomposeFlags dc_flags;
  std::string dc_concept;
  auto* decompose = app.add_subcommand("decompose", "Learn the decomposition of one concept");
  add_common(decompose, dc);
  add_decompose_flags(decompose, dc_flags);
  decompose->add_option("--concept", dc_concept, "Suite concept")->required();

  // inspect
  std::string in_dec;
  Common in;
  auto* inspect = app.add_subcommand("inspect", "Print ranked tokens and coefficients");
  add_common(inspect, in);
  inspect->add_option("decomposition", in_dec, "Decomposition id or path")->required();

  // single-image
  Common si;
  std::string si_dec;
  double si_tau = 0.95;
  std::string si_order = "ascending_coefficient";
  auto* single_image = app.add_subcommand("single-image", "Prune the decomposition for one generated image");
  add_common(single_image, si);
  single_image->add_option("decomposition", si_dec, "Decomposition id or path")->required();
  single_image->add_option("--tau", si_tau, "Similarity threshold for removal");
  single_image->add_option("--order", si_order, "ascending_coefficient or descending_coefficient");

  // manipulate
  Common mp;
  std::string mp_dec;
  std::vector<std::string> mp_edits, mp_tokens;
  std::optional<double> mp_scale;
  int mp_count = 1;
  auto* manipulate_cmd = app.add_subcommand("manipulate", "Generate with edited token coefficients");
  add_common(manipulate_cmd, mp);
  manipulate_cmd->add_option("decomposition", mp_dec, "Decomposition id or path")->required();
  manipulate_cmd->add_option("--edit", mp_edits, "token=scale, repeatable");
  manipulate_cmd->add_option("--token", mp_tokens, "Token to scale by --scale, repeatable");
  manipulate_cmd->add_option("--scale", mp_scale, "Scale for every --token");
  manipulate_cmd->add_option("--count", mp_count, "Images, seeds seed..seed+count-1");

  // debias
  Common db;
  std::string db_dec;
  std::vector<std::string> db_tokens;
  double db_factor = 0.0;
  auto* debias_cmd = app.add_subcommand("debias", "Attenuate tokens and save a derived decomposition");
  add_common(debias_cmd, db);
  debias_cmd->add_option("decomposition", db_dec, "Decomposition id or path")->required();
  debias_cmd->add_option("--token", db_tokens, "Token to attenuate, repeatable")->required();
  debias_cmd->add_option("--factor", db_factor, "Coefficient factor in [0, 1)");

  // robustness
  Common rb;
  DecomposeFlags rb_flags;
  std::vector<std::string> rb_concepts;
  int rb_runs = 3;
  std::vector<int> rb_ks{3, 5, 8};
  auto* robustness = app.add_subcommand("robustness", "Top-k agreement across independent trainings");
  add_common(robustness, rb);
  add_decompose_flags(robustness, rb_flags);
  robustness->add_option("--concept", rb_concepts, "Concepts (default: the whole suite)");
  robustness->add_option("--runs", rb_runs, "Trainings per concept");
  robustness->add_option("--k", rb_ks, "Cut-offs");

  // generalization
  Common gz;
  DecomposeFlags gz_flags;
  std::vector<std::string> gz_concepts;
  int gz_draws = 1;
  auto* generalization = app.add_subcommand("generalization", "Held-out denoising loss per timestep");
  add_common(generalization, gz);
  add_decompose_flags(generalization, gz_flags);
  generalization->add_option("--concept", gz_concepts, "Concepts (default: the whole suite)");
  generalization->add_option("--draws", gz_draws, "Noise draws per timestep and image");

  // baseline
  Common bl;
  std::string bl_method;
  std::string bl_concept;
  Eigen::Index bl_components = 8;
  std::vector<int> bl_timesteps{10, 30, 50, 70, 90};
  int bl_samples = 8;
  bool bl_rsvd = false;
  auto* baseline = app.add_subcommand("baseline", "Activation-factorization baseline");
  add_common(baseline, bl);
  baseline->add_option("method", bl_method, "pca, kmeans or nmf")->required();
  baseline->add_option("--concept", bl_concept, "Suite concept")->required();
  baseline->add_option("--components", bl_components, "Basis size");
  baseline->add_option("--timesteps", bl_timesteps, "Recorded timesteps");
  baseline->add_option("--samples", bl_samples, "Generated images used for fitting and evaluation");
  baseline->add_flag("--randomized-svd", bl_rsvd, "Randomized SVD for PCA");

  // report
  Common rp;
  std::vector<std::string> rp_inputs;
  std::vector<std::string> rp_sweeps;
  auto* report = app.add_subcommand("report", "Merge study results and write tables and plots");
  add_common(report, rp);
  report->add_option("--input", rp_inputs, "report.json files to merge");
  report->add_option("--sweep", rp_sweeps, "Decompositions whose top token gets a scale sweep");

  // serve
  Common sv;
  std::string sv_host = "127.0.0.1";
  int sv_port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP API over the workspace");
  add_common(serve, sv);
  serve->add_option("--host", sv_host, "Bind address");
  serve->add_option("--port", sv_port, "Port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  const Workspace ws(workspace);
  const ConceptCorpusPlan plan;
  const PooledCosineOracle oracle;

  try {
    if (*gen_data) {
      const Vocabulary vocab = fs::exists(ws.checkpoint())
                                   ? load_checkpoint(ws.checkpoint()).vocab
                                   : make_default_vocabulary(SubjectConfig{}.vocab);
      ConceptCorpusPlan p = plan;
      if (gd.seed) p.master_seed = *gd.seed;
      if (gd_count) p.train_count = gd_count;
      const fs::path dir = out_dir(gd, ws.root / "data");
      std::vector<CompositeConceptSpec> specs;
      const auto suite = default_concept_suite(vocab);
      const auto names = gd_concepts.empty() ? suite_names(vocab) : gd_concepts;
      for (const auto& name : names) {
        const std::size_t idx = suite_index(vocab, name);
        specs.push_back(suite[idx]);
        fs::create_directories(dir / "images" / name);
        const auto images = concept_images(suite[idx], idx, CorpusSplit::train, p);
        for (std::size_t i = 0; i < images.size(); ++i) {
          char file[32];
          std::snprintf(file, sizeof file, "%05zu.png", i);
          write_png(dir / "images" / name / file, images[i]);
        }
      }
      write_json(dir / "manifest.json", manifest_to_json(make_manifest(specs, vocab, p.train_count, p.master_seed)));
      std::printf("%s\n", (dir / "manifest.json").string().c_str());
      return 0;
    }

    if (*train_subject_cmd) {
      SubjectConfig cfg = subject_config_from_json(config_json(ts));
      if (ts.seed) cfg.init_seed = cfg.training.seed = *ts.seed;
      if (ts_steps) cfg.training.steps = *ts_steps;
      const Workspace target(out_dir(ts, ws.root));
      RunRecord record;
      record.kind = RunKind::subject_train;
      record.config = subject_config_to_json(cfg);
      record.created_at = utc_timestamp();
      const SubjectBundle bundle = train_subject_bundle(cfg, nullptr, [&](int step, double loss) {
        if (step % 100 == 0 || step == cfg.training.steps) {
          std::fprintf(stderr, "\rstep %d/%d loss %.5f", step, cfg.training.steps, loss);
          std::fflush(stderr);
        }
      });
      std::fputc('\n', stderr);
      save_checkpoint(target.checkpoint(), bundle.vocab, bundle.schedule, bundle.model);
      write_json(target.subject_config(), subject_config_to_json(cfg));
      record.outputs = {{"checkpoint", "subject.ckpt"},
                        {"subject_hash", bundle.model.weights_hash()},
                        {"vocab_hash", bundle.vocab.version_hash()}};
      record.finished_at = utc_timestamp();
      const RunRecord stored = RunRegistry(target.registry()).put(record);
      std::printf("%s\nsubject_hash %s\nvocab_hash %s\nrun_id %s\n", target.checkpoint().string().c_str(),
                  bundle.model.weights_hash().c_str(), bundle.vocab.version_hash().c_str(), stored.run_id.c_str());
      return 0;
    }

    const SubjectBundle bundle = load_subject(ws);
    const Vocabulary& vocab = bundle.vocab;

    if (*decompose) {
      const DecompositionConfig cfg = decomposition_config(dc, dc_flags);
      const auto stored = decompose_and_store(ws, bundle, dc_concept, cfg, plan, oracle,
                                              [&](double f) { progress_line(dc_concept, f); });
      fs::path path = stored.path;
      if (!dc.out.empty()) {
        path = out_dir(dc, {}) / (stored.id + ".json");
        save_decomposition(path, stored.decomposition, vocab);
      }
      std::printf("%s\n%s\n", stored.id.c_str(), path.string().c_str());
      print_ranked(stored.decomposition, vocab);
      return 0;
    }

    if (*inspect) {
      print_ranked(load_workspace_decomposition(ws, bundle, in_dec), vocab);
      return 0;
    }

    if (*single_image) {
      const Decomposition dec = load_workspace_decomposition(ws, bundle, si_dec);
      SingleImageConfig cfg;
      cfg.tau = si_tau;
      cfg.order = parse_removal_order(si_order);
      cfg.guidance_scale = dec.config.guidance_scale;
      cfg.sampler_steps = dec.config.sampler_steps;
      const std::uint64_t seed = si.seed.value_or(0);
      const auto result = single_image_decompose(bundle.model, bundle.schedule, vocab, dec, seed, oracle, cfg);
      const fs::path dir = out_dir(si, ws.root / "single_image" / (dec.concept_name + "-" + std::to_string(seed)));
      write_json(dir / "result.json", single_image_to_json(result, vocab, oracle.name()));
      write_png(dir / "reference.png", result.reference);
      write_png(dir / "final.png", result.final_image);
      for (std::size_t i = 0; i < result.trace.size(); ++i) {
        char file[96];
        std::snprintf(file, sizeof file, "trace_%02zu_%s.png", i, vocab.token(result.trace[i].token_id).c_str());
        write_png(dir / file, result.trace_images[i]);
      }
      for (const auto& e : result.trace)
        std::printf("pass %d %s %s %s\n", e.pass, vocab.token(e.token_id).c_str(), format_double(e.similarity).c_str(),
                    e.removed ? "removed" : "kept");
      std::printf("surviving");
      for (const auto& r : result.surviving) std::printf(" %s", vocab.token(r.token_id).c_str());
      std::printf("\n%s\n", dir.string().c_str());
      return 0;
    }

    if (*manipulate_cmd) {
      const Decomposition dec = load_workspace_decomposition(ws, bundle, mp_dec);
      require(mp_count >= 1, "--count must be >= 1", "count");
      ManipulationRequest request;
      request.edits = parse_edits(vocab, mp_edits, mp_tokens, mp_scale);
      request.guidance_scale = dec.config.guidance_scale;
      request.sampler_steps = dec.config.sampler_steps;
      const fs::path dir = out_dir(mp, ws.root / "manipulate");
      const std::uint64_t seed = mp.seed.value_or(0);
      for (int i = 0; i < mp_count; ++i) {
        request.seed = seed + static_cast<std::uint64_t>(i);
        const Image img = manipulate(bundle.model, bundle.schedule, vocab, dec, request);
        const fs::path path = dir / ("manipulate_" + std::to_string(request.seed) + ".png");
        write_png(path, img);
        std::printf("%s\n", path.string().c_str());
      }
      return 0;
    }

    if (*debias_cmd) {
      const Decomposition dec = load_workspace_decomposition(ws, bundle, db_dec);
      std::vector<TokenId> ids;
      for (const auto& t : db_tokens) ids.push_back(vocab.id(t));
      const Decomposition out = debias(dec, vocab, ids, db_factor);
      const fs::path source = fs::exists(db_dec) ? fs::path(db_dec) : ws.decomposition_file(db_dec);
      const fs::path path = out_dir(db, ws.decompositions()) / (source.stem().string() + "-debiased.json");
      save_decomposition(path, out, vocab);
      std::printf("%s\n", path.string().c_str());
      print_ranked(out, vocab);
      return 0;
    }

    if (*robustness) {
      require(rb_runs >= 2, "--runs must be >= 2", "runs");
      const DecompositionConfig cfg = decomposition_config(rb, rb_flags);
      std::vector<std::uint64_t> seeds;
      for (int j = 0; j < rb_runs; ++j) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(j));
      StudyReport rep;
      rep.subject_hash = bundle.model.weights_hash();
      rep.vocab_hash = vocab.version_hash();
      rep.seeds = {{"decomposition", seeds}, {"corpus_master", plan.master_seed}};
      for (const auto& name : rb_concepts.empty() ? suite_names(vocab) : rb_concepts) {
        std::vector<ConceptCorpus> corpora;
        for (int j = 0; j < rb_runs; ++j) corpora.push_back(suite_corpus(vocab, name, plan, static_cast<std::size_t>(j)));
        std::fprintf(stderr, "%s: %d trainings\n", name.c_str(), rb_runs);
        const auto result = robustness_study(bundle.model, bundle.schedule, vocab, corpora, seeds, cfg, oracle, rb_ks);
        rep.intersections.push_back(result.report);
        for (std::size_t j = 0; j < result.runs.size(); ++j)
          rep.training_logs.emplace_back(name + "_run" + std::to_string(j), result.runs[j].log);
        std::printf("%s", name.c_str());
        for (const auto& k : result.report.per_k) std::printf(" top%d=%s", k.k, format_double(k.mean_count).c_str());
        std::printf("\n");
      }
      const fs::path dir = out_dir(rb, ws.root / "reports" / "robustness");
      emit_report(rep, dir);
      std::printf("%s\n", (dir / "report.json").string().c_str());
      return 0;
    }

    if (*generalization) {
      const DecompositionConfig cfg = decomposition_config(gz, gz_flags);
      StudyReport rep;
      rep.subject_hash = bundle.model.weights_hash();
      rep.vocab_hash = vocab.version_hash();
      rep.seeds = {{"decomposition", cfg.seed}, {"study", gz.seed.value_or(0)}, {"corpus_master", plan.master_seed}};
      for (const auto& name : gz_concepts.empty() ? suite_names(vocab) : gz_concepts) {
        const ConceptCorpus corpus = suite_corpus(vocab, name, plan);
        const Decomposition dec = train_decomposition(bundle.model, bundle.schedule, vocab, corpus, cfg, oracle,
                                                      [&](double f) { progress_line(name + " w*", f); });
        TokenOptimizationConfig tcfg;
        tcfg.seed = cfg.seed;
        tcfg.batch = cfg.batch;
        tcfg.max_steps = cfg.max_steps;
        const OptimizedToken w_o = optimize_token(bundle.model, bundle.schedule, vocab, corpus, tcfg);
        const auto spec = default_concept_suite(vocab)[suite_index(vocab, name)];
        const auto test = concept_images(spec, suite_index(vocab, name), CorpusSplit::test, plan);
        const auto curve = generalization_study(
            bundle.model, bundle.schedule, vocab,
            {{"w_star", dec.w_star}, {"w_concept", vocab.embedding(dec.concept_token_id)}, {"w_opt", w_o.vector}},
            dec.candidate_ids, test, gz_draws, gz.seed.value_or(0));
        rep.generalization.emplace_back(name, curve);
        rep.training_logs.emplace_back(name, dec.log);
        std::printf("%s", name.c_str());
        for (std::size_t c = 0; c < curve.names.size(); ++c)
          std::printf(" %s=%s", curve.names[c].c_str(), format_double(curve.mean_normalized[c]).c_str());
        std::printf("\n");
      }
      const fs::path dir = out_dir(gz, ws.root / "reports" / "generalization");
      emit_report(rep, dir);
      std::printf("%s\n", (dir / "report.json").string().c_str());
      return 0;
    }

    if (*baseline) {
      const BasisMethod method = parse_basis_method(bl_method);
      require(bl_samples >= 1, "--samples must be >= 1", "samples");
      const auto spec = default_concept_suite(vocab)[suite_index(vocab, bl_concept)];
      const Vector cond = encode_prompt(vocab, atom_prompt(vocab, spec.atom_tokens()));
      const Vector uncond = encode_prompt(vocab, null_prompt(vocab));
      const std::uint64_t seed = bl.seed.value_or(0);
      std::vector<std::uint64_t> seeds;
      for (int i = 0; i < bl_samples; ++i) seeds.push_back(seed + static_cast<std::uint64_t>(i));
      BasisFitConfig fit;
      fit.seed = seed;
      fit.randomized_svd = bl_rsvd;
      const SamplerConfig sampler;
      const ActivationBasis basis = fit_activation_basis(bundle.model, bundle.schedule, cond, uncond, method,
                                                         bl_components, bl_timesteps, seeds, sampler, fit);
      for (const auto& w : basis.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      const fs::path dir = out_dir(bl, ws.root / "reports" / ("baseline_" + bl_method + "_" + bl_concept));
      double total = 0.0;
      Json per_seed = Json::array();
      for (auto s : seeds) {
        SamplerConfig cfg = sampler;
        cfg.seed = s;
        const Image plain = sample_conditioned(bundle.model, bundle.schedule, cond, uncond, cfg);
        const Image projected = sample_with_basis(bundle.model, bundle.schedule, cond, uncond, basis, cfg);
        write_png(dir / ("plain_" + std::to_string(s) + ".png"), plain);
        write_png(dir / ("basis_" + std::to_string(s) + ".png"), projected);
        const double sim = oracle.similarity(plain, projected);
        per_seed.push_back({{"seed", s}, {"similarity", sim}});
        total += sim;
      }
      StudyReport rep;
      rep.subject_hash = bundle.model.weights_hash();
      rep.vocab_hash = vocab.version_hash();
      rep.seeds = {{"samples", seeds}, {"fit", seed}};
      rep.extra = {{"baseline",
                    {{"method", bl_method},
                     {"concept", bl_concept},
                     {"components", basis.n_components()},
                     {"timesteps", basis.timesteps},
                     {"iterations", basis.iterations},
                     {"initializations", basis.initializations},
                     {"initialization", basis.initialization},
                     {"warnings", basis.warnings},
                     {"per_seed", per_seed},
                     {"mean_similarity", total / static_cast<double>(seeds.size())}}}};
      emit_report(rep, dir);
      std::printf("%s mean_similarity=%s\n%s\n", bl_method.c_str(),
                  format_double(total / static_cast<double>(seeds.size())).c_str(), dir.string().c_str());
      return 0;
    }

    if (*report) {
      StudyReport rep;
      rep.subject_hash = bundle.model.weights_hash();
      rep.vocab_hash = vocab.version_hash();
      for (const auto& input : rp_inputs) {
        const StudyReport part = study_report_from_json(read_json(input));
        require(part.subject_hash == rep.subject_hash && part.vocab_hash == rep.vocab_hash,
                "report " + input + " belongs to another subject", "input");
        merge_reports(rep, part);
      }
      const std::uint64_t seed = rp.seed.value_or(0);
      for (const auto& id : rp_sweeps) {
        const Decomposition dec = load_workspace_decomposition(ws, bundle, id);
        ManipulationSweep sweep;
        sweep.concept_name = dec.concept_name;
        sweep.token = vocab.token(dec.ranked.front().token_id);
        ManipulationRequest request;
        request.seed = seed;
        request.guidance_scale = dec.config.guidance_scale;
        request.sampler_steps = dec.config.sampler_steps;
        const Image base = manipulate(bundle.model, bundle.schedule, vocab, dec, request);
        for (int i = 0; i <= 8; ++i) {
          const double scale = 0.25 * i;
          request.edits = {{dec.ranked.front().token_id, scale}};
          sweep.scales.push_back(scale);
          sweep.similarity.push_back(
              oracle.similarity(base, manipulate(bundle.model, bundle.schedule, vocab, dec, request)));
        }
        rep.sweeps.push_back(sweep);
      }
      rep.seeds["sweep"] = seed;
      const fs::path dir = out_dir(rp, ws.root / "reports" / "combined");
      for (const auto& f : emit_report(rep, dir)) std::printf("%s\n", (dir / f).string().c_str());
      return 0;
    }

    if (*serve) {
      LabService service(ws, bundle, plan);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::fprintf(stderr, "serving %s on http://%s:%d\n", ws.root.string().c_str(), sv_host.c_str(), sv_port);
      const bool ok = service.listen(sv_host, sv_port);
      g_service = nullptr;
      if (!ok && sv_port > 0) throw std::runtime_error("could not listen on " + sv_host + ":" + std::to_string(sv_port));
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what();
    if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
    std::cerr << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
