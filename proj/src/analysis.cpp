#include "conceptor/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/SVD>

namespace conceptor {

int topk_intersection(const std::vector<RankedToken>& a, const std::vector<RankedToken>& b, std::size_t k) {
  std::set<TokenId> left;
  for (std::size_t i = 0; i < std::min(k, a.size()); ++i) left.insert(a[i].token_id);
  int count = 0;
  for (std::size_t i = 0; i < std::min(k, b.size()); ++i) count += left.count(b[i].token_id) ? 1 : 0;
  return count;
}

IntersectionReport intersection_report(const std::string& concept_name,
                                       const std::vector<std::vector<RankedToken>>& runs,
                                       const std::vector<int>& ks) {
  require(runs.size() >= 2, "robustness needs at least 2 runs", "runs");
  IntersectionReport out{concept_name, {}};
  for (int k : ks) {
    require(k >= 1, "k must be positive", "k");
    for (const auto& run : runs)
      require(run.size() >= static_cast<std::size_t>(k), "fewer ranked tokens than k = " + std::to_string(k), "k");
    double total = 0.0;
    for (std::size_t j = 1; j < runs.size(); ++j)
      total += topk_intersection(runs[0], runs[j], static_cast<std::size_t>(k));
    const double mean = total / static_cast<double>(runs.size() - 1);
    out.per_k.push_back({k, mean, mean / k});
  }
  return out;
}

std::vector<double> intersection_stddev(const std::vector<IntersectionReport>& reports) {
  if (reports.empty()) return {};
  const std::size_t nk = reports.front().per_k.size();
  std::vector<double> out(nk, 0.0);
  for (std::size_t i = 0; i < nk; ++i) {
    double mean = 0.0;
    for (const auto& r : reports) mean += r.per_k.at(i).mean_count;
    mean /= static_cast<double>(reports.size());
    double var = 0.0;
    for (const auto& r : reports) var += std::pow(r.per_k.at(i).mean_count - mean, 2);
    out[i] = reports.size() > 1 ? std::sqrt(var / static_cast<double>(reports.size() - 1)) : 0.0;
  }
  return out;
}

RobustnessResult robustness_study(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                  const std::vector<ConceptCorpus>& corpora, const std::vector<std::uint64_t>& seeds,
                                  const DecompositionConfig& config, const SimilarityOracle& oracle,
                                  const std::vector<int>& ks) {
  require(corpora.size() >= 2, "robustness needs at least 2 runs", "runs");
  require(seeds.size() == corpora.size(), "one seed per run is required", "seeds");
  for (int k : ks) require(k <= config.n, "k exceeds the decomposition size n", "k");
  RobustnessResult out;
  std::vector<std::vector<RankedToken>> ranked;
  for (std::size_t j = 0; j < corpora.size(); ++j) {
    DecompositionConfig cfg = config;
    cfg.seed = seeds[j];
    out.runs.push_back(train_decomposition(model, sched, vocab, corpora[j], cfg, oracle));
    ranked.push_back(out.runs.back().ranked);
  }
  out.report = intersection_report(corpora.front().concept_name, ranked, ks);
  return out;
}

GeneralizationCurve generalization_study(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                         const std::vector<GeneralizationInput>& inputs,
                                         std::span<const TokenId> candidates, const std::vector<Image>& test_images,
                                         int draws_per_t, std::uint64_t seed) {
  require(!test_images.empty(), "generalization study needs test images", "test_corpus");
  require(!candidates.empty(), "generalization study needs candidate tokens", "candidates");
  require(draws_per_t >= 1, "draws_per_t must be >= 1", "draws_per_t");

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  GeneralizationCurve out;
  out.random_token = candidates[pick(rng)];
  out.T = sched.steps();

  std::vector<Vector> conds;
  for (const auto& in : inputs) {
    out.names.push_back(in.name);
    conds.push_back(encode_prompt(vocab, pseudo_token_prompt(vocab, in.pseudo)));
  }
  out.names.push_back("random:" + vocab.token(out.random_token));
  conds.push_back(encode_prompt(vocab, pseudo_token_prompt(vocab, vocab.embedding(out.random_token))));

  const std::size_t C = conds.size();
  const std::size_t I = test_images.size();
  const int T = out.T;
  const auto D = model.image_dim();
  const auto B = static_cast<Eigen::Index>(C * I);

  // per_image[c][i][t-1]
  std::vector<std::vector<std::vector<double>>> per_image(C, std::vector<std::vector<double>>(I, std::vector<double>(T, 0.0)));
  Matrix z(D, B), eps_all(D, B), cond(model.cond_dim(), B);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < I; ++i) cond.col(static_cast<Eigen::Index>(c * I + i)) = conds[c];
  std::vector<int> ts(static_cast<std::size_t>(B));
  Matrix eps(D, static_cast<Eigen::Index>(I));

  for (int t = 1; t <= T; ++t) {
    std::fill(ts.begin(), ts.end(), t);
    for (int d = 0; d < draws_per_t; ++d) {
      fill_normal(rng, eps);
      for (std::size_t i = 0; i < I; ++i) {
        const Vector zi = noise_image(test_images[i], eps.col(static_cast<Eigen::Index>(i)), t, sched);
        for (std::size_t c = 0; c < C; ++c) {
          const auto col = static_cast<Eigen::Index>(c * I + i);
          z.col(col) = zi;
          eps_all.col(col) = eps.col(static_cast<Eigen::Index>(i));
        }
      }
      const Matrix pred = model.predict(z, ts, cond);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < I; ++i) {
          const auto col = static_cast<Eigen::Index>(c * I + i);
          per_image[c][i][static_cast<std::size_t>(t - 1)] +=
              (pred.col(col) - eps_all.col(col)).squaredNorm() / static_cast<double>(D) / draws_per_t;
        }
    }
  }

  const std::size_t R = C - 1;
  auto stderr_of = [&](const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    return std::sqrt(var / static_cast<double>(xs.size()));
  };
  out.raw.assign(C, std::vector<double>(T, 0.0));
  out.normalized.assign(C, std::vector<double>(T, 0.0));
  out.stderr_t.assign(C, std::vector<double>(T, 0.0));
  out.mean_normalized.assign(C, 0.0);
  out.stderr_mean.assign(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<double> image_means(I, 0.0);
    for (int t = 0; t < T; ++t) {
      std::vector<double> diffs(I);
      double raw = 0.0;
      for (std::size_t i = 0; i < I; ++i) {
        raw += per_image[c][i][static_cast<std::size_t>(t)];
        diffs[i] = c == R ? 0.0 : per_image[c][i][static_cast<std::size_t>(t)] - per_image[R][i][static_cast<std::size_t>(t)];
        image_means[i] += diffs[i] / T;
      }
      out.raw[c][static_cast<std::size_t>(t)] = raw / static_cast<double>(I);
      double norm = 0.0;
      for (double x : diffs) norm += x;
      out.normalized[c][static_cast<std::size_t>(t)] = norm / static_cast<double>(I);
      out.stderr_t[c][static_cast<std::size_t>(t)] = stderr_of(diffs);
    }
    double mean = 0.0;
    for (double x : image_means) mean += x;
    out.mean_normalized[c] = mean / static_cast<double>(I);
    out.stderr_mean[c] = stderr_of(image_means);
  }
  return out;
}

// ---- activation baselines ----

std::string_view basis_method_name(BasisMethod method) {
  switch (method) {
    case BasisMethod::pca: return "pca";
    case BasisMethod::kmeans: return "kmeans";
    case BasisMethod::nmf: return "nmf";
  }
  return "pca";
}

BasisMethod parse_basis_method(std::string_view name) {
  if (name == "pca") return BasisMethod::pca;
  if (name == "kmeans") return BasisMethod::kmeans;
  if (name == "nmf") return BasisMethod::nmf;
  throw ValidationError("unknown basis method '" + std::string(name) + "'", "method");
}

namespace {

constexpr int kNmfProjectionIters = 100;

/// Coordinate descent for min_{W >= 0} ||X - W H||^2 with H fixed (k x p).
void hals_update_w(const Matrix& X, const Matrix& H, Matrix& W, int iters) {
  const Matrix XHt = X * H.transpose();
  const Matrix HHt = H * H.transpose();
  for (int it = 0; it < iters; ++it)
    for (Eigen::Index j = 0; j < H.rows(); ++j) {
      if (HHt(j, j) <= 0.0) {
        W.col(j).setZero();
        continue;
      }
      W.col(j) = (W.col(j) + (XHt.col(j) - W * HHt.col(j)) / HHt(j, j)).cwiseMax(0.0);
    }
}

Matrix nonnegative_codes(const Matrix& X, const Matrix& H) {
  Matrix W = Matrix::Zero(X.rows(), H.rows());
  hals_update_w(X, H, W, kNmfProjectionIters);
  return W;
}

Eigen::Index nearest(const Matrix& centroids, const Eigen::Ref<const Vector>& x, double* dist = nullptr) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.cols(); ++c) {
    const double d = (centroids.col(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

/// Samples as columns (features x m).
Matrix kmeans_plus_plus(const Matrix& Xt, Eigen::Index k, Rng& rng) {
  const Eigen::Index m = Xt.cols();
  Matrix centroids(Xt.rows(), k);
  std::uniform_int_distribution<Eigen::Index> first(0, m - 1);
  std::vector<bool> chosen(static_cast<std::size_t>(m), false);
  Eigen::Index idx = first(rng);
  centroids.col(0) = Xt.col(idx);
  chosen[static_cast<std::size_t>(idx)] = true;
  Vector d2(m);
  for (Eigen::Index i = 0; i < m; ++i) d2[i] = (Xt.col(i) - centroids.col(0)).squaredNorm();
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      idx = m - 1;
      for (Eigen::Index i = 0; i < m; ++i) {
        r -= d2[i];
        if (r < 0.0 && d2[i] > 0.0) {
          idx = i;
          break;
        }
      }
      while (d2[idx] == 0.0 && idx > 0) --idx;
    } else {
      idx = 0;
      while (idx < m - 1 && chosen[static_cast<std::size_t>(idx)]) ++idx;
    }
    chosen[static_cast<std::size_t>(idx)] = true;
    centroids.col(c) = Xt.col(idx);
    for (Eigen::Index i = 0; i < m; ++i) d2[i] = std::min(d2[i], (Xt.col(i) - centroids.col(c)).squaredNorm());
  }
  return centroids;
}

Matrix top_right_singular_vectors(const Matrix& A, Eigen::Index k, const BasisFitConfig& config, Vector* singular) {
  if (!config.randomized_svd) {
    Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinV);
    *singular = svd.singularValues().head(std::min<Eigen::Index>(k, svd.singularValues().size()));
    return svd.matrixV().leftCols(singular->size());
  }
  const Eigen::Index l = std::min<Eigen::Index>(k + config.rsvd_oversamples, std::min(A.rows(), A.cols()));
  Rng rng(config.seed);
  Matrix omega(A.cols(), l);
  fill_normal(rng, omega);
  Matrix Y = A * omega;
  Eigen::HouseholderQR<Matrix> qr(Y);
  Matrix Q = qr.householderQ() * Matrix::Identity(A.rows(), l);
  for (int it = 0; it < config.rsvd_iters; ++it) {
    Matrix Z = A.transpose() * Q;
    Eigen::HouseholderQR<Matrix> qz(Z);
    Z = qz.householderQ() * Matrix::Identity(A.cols(), l);
    Y = A * Z;
    Eigen::HouseholderQR<Matrix> qy(Y);
    Q = qy.householderQ() * Matrix::Identity(A.rows(), l);
  }
  Eigen::JacobiSVD<Matrix> small(Q.transpose() * A, Eigen::ComputeThinV);
  *singular = small.singularValues().head(std::min(k, l));
  return small.matrixV().leftCols(singular->size());
}

}  // namespace

Matrix ActivationBasis::reconstruct(const Matrix& h) const {
  require(h.rows() == components.rows(), "basis dimension does not match the activations", "basis");
  switch (method) {
    case BasisMethod::pca: {
      const Matrix centered = h.colwise() - mean;
      return (components * (components.transpose() * centered)).colwise() + mean;
    }
    case BasisMethod::kmeans: {
      Matrix out(h.rows(), h.cols());
      for (Eigen::Index j = 0; j < h.cols(); ++j) out.col(j) = components.col(nearest(components, h.col(j)));
      return out;
    }
    case BasisMethod::nmf: {
      const Matrix X = h.transpose().cwiseMax(0.0);
      const Matrix H = components.transpose();
      return (nonnegative_codes(X, H) * H).transpose();
    }
  }
  return h;
}

ActivationBasis fit_pca(const Matrix& samples, Eigen::Index n_c, const BasisFitConfig& config) {
  require(samples.rows() >= 1, "no activation samples", "samples");
  require(n_c >= 1 && n_c <= samples.cols(), "n_c must lie in [1, activation dimension]", "n_c");
  ActivationBasis out;
  out.method = BasisMethod::pca;
  out.mean = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - out.mean.transpose();
  Vector s;
  const Matrix V = top_right_singular_vectors(centered, n_c, config, &s);
  const double tol = (s.size() ? s[0] : 0.0) * static_cast<double>(std::max(samples.rows(), samples.cols())) *
                     std::numeric_limits<double>::epsilon();
  Eigen::Index rank = 0;
  while (rank < s.size() && s[rank] > tol) ++rank;
  if (rank < n_c)
    out.warnings.push_back("activation matrix has rank " + std::to_string(rank) + " < n_c = " + std::to_string(n_c) +
                           "; returning " + std::to_string(rank) + " components");
  out.components = V.leftCols(rank);
  out.initialization = config.randomized_svd ? "randomized_svd" : "exact_svd";
  out.iterations = config.randomized_svd ? config.rsvd_iters : 0;
  return out;
}

double quantization_error(const Matrix& samples, const Matrix& centroids) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    double d = 0.0;
    nearest(centroids, samples.row(i).transpose(), &d);
    total += d;
  }
  return total;
}

ActivationBasis fit_kmeans(const Matrix& samples, Eigen::Index n_c, const BasisFitConfig& config) {
  require(n_c >= 1 && n_c <= samples.rows(), "k-means needs 1 <= n_c <= sample count", "n_c");
  require(config.kmeans_inits >= 1 && config.kmeans_iters >= 0, "invalid k-means iteration counts", "kmeans");
  const Matrix Xt = samples.transpose();
  const Eigen::Index m = Xt.cols();
  Rng rng(config.seed);
  Matrix best;
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(m));
  for (int init = 0; init < config.kmeans_inits; ++init) {
    Matrix c = kmeans_plus_plus(Xt, n_c, rng);
    for (int it = 0; it < config.kmeans_iters; ++it) {
      bool changed = false;
      for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index a = nearest(c, Xt.col(i));
        changed |= it == 0 || assign[static_cast<std::size_t>(i)] != a;
        assign[static_cast<std::size_t>(i)] = a;
      }
      if (!changed) break;
      Matrix sum = Matrix::Zero(Xt.rows(), n_c);
      Vector count = Vector::Zero(n_c);
      for (Eigen::Index i = 0; i < m; ++i) {
        sum.col(assign[static_cast<std::size_t>(i)]) += Xt.col(i);
        count[assign[static_cast<std::size_t>(i)]] += 1.0;
      }
      for (Eigen::Index j = 0; j < n_c; ++j)
        if (count[j] > 0) c.col(j) = sum.col(j) / count[j];
    }
    const double err = quantization_error(samples, c);
    if (err < best_err) {
      best_err = err;
      best = std::move(c);
    }
  }
  ActivationBasis out;
  out.method = BasisMethod::kmeans;
  out.components = std::move(best);
  out.mean = Vector::Zero(samples.cols());
  out.iterations = config.kmeans_iters;
  out.initializations = config.kmeans_inits;
  out.initialization = "kmeans++";
  return out;
}

ActivationBasis fit_nmf(const Matrix& samples, Eigen::Index n_c, const BasisFitConfig& config) {
  require(n_c >= 1 && n_c <= std::min(samples.rows(), samples.cols()), "NMF needs 1 <= n_c <= min(samples, dim)",
          "n_c");
  const Matrix X = samples.cwiseMax(0.0);
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& S = svd.singularValues();
  Matrix W = Matrix::Zero(X.rows(), n_c);
  Matrix H = Matrix::Zero(n_c, X.cols());
  for (Eigen::Index j = 0; j < n_c; ++j) {
    const Vector x = svd.matrixU().col(j);
    const Vector y = svd.matrixV().col(j);
    if (j == 0) {
      W.col(0) = std::sqrt(S[0]) * x.cwiseAbs();
      H.row(0) = std::sqrt(S[0]) * y.cwiseAbs().transpose();
      continue;
    }
    const Vector xp = x.cwiseMax(0.0), xn = (-x).cwiseMax(0.0);
    const Vector yp = y.cwiseMax(0.0), yn = (-y).cwiseMax(0.0);
    const double mp = xp.norm() * yp.norm(), mn = xn.norm() * yn.norm();
    const bool pos = mp >= mn;
    const Vector& u = pos ? xp : xn;
    const Vector& v = pos ? yp : yn;
    const double m = pos ? mp : mn;
    if (m <= 0.0) continue;
    const double scale = std::sqrt(S[j] * m);
    W.col(j) = scale * u / u.norm();
    H.row(j) = scale * v.transpose() / v.norm();
  }
  for (int it = 0; it < config.nmf_iters; ++it) {
    hals_update_w(X, H, W, 1);
    Matrix Ht = H.transpose();
    hals_update_w(X.transpose(), W.transpose(), Ht, 1);
    H = Ht.transpose();
  }
  ActivationBasis out;
  out.method = BasisMethod::nmf;
  out.components = H.transpose();
  out.mean = Vector::Zero(samples.cols());
  out.iterations = config.nmf_iters;
  out.initializations = 1;
  out.initialization = "nndsvd";
  return out;
}

ActivationBasis fit_basis(BasisMethod method, const Matrix& samples, Eigen::Index n_c, const BasisFitConfig& config) {
  switch (method) {
    case BasisMethod::pca: return fit_pca(samples, n_c, config);
    case BasisMethod::kmeans: return fit_kmeans(samples, n_c, config);
    case BasisMethod::nmf: return fit_nmf(samples, n_c, config);
  }
  return fit_pca(samples, n_c, config);
}

Matrix record_activations(const Denoiser& model, const NoiseSchedule& sched, const Vector& cond, const Vector& uncond,
                          std::span<const std::uint64_t> seeds, const std::vector<int>& timesteps,
                          double guidance_scale, int sampler_steps) {
  require(model.hidden_dim() > 0, "model exposes no hookable hidden layer", "model");
  require(!timesteps.empty(), "no hook timesteps", "timesteps");
  const std::set<int> wanted(timesteps.begin(), timesteps.end());
  const auto grid = sampling_timesteps(sched, sampler_steps);
  for (int t : wanted)
    require(std::find(grid.begin(), grid.end(), t) != grid.end(),
            "hook timestep " + std::to_string(t) + " is not visited by a " + std::to_string(sampler_steps) +
                "-step sampler",
            "timesteps");
  std::vector<Vector> rows;
  HiddenHook hook = [&](Matrix& hidden, std::span<const int> t) {
    for (Eigen::Index j = 0; j < hidden.cols(); ++j)
      if (wanted.count(t[static_cast<std::size_t>(j)])) rows.emplace_back(hidden.col(j));
  };
  sample_batch(model, sched, cond, uncond, seeds, guidance_scale, sampler_steps, &hook);
  Matrix out(static_cast<Eigen::Index>(rows.size()), model.hidden_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return out;
}

ActivationBasis fit_activation_basis(const Denoiser& model, const NoiseSchedule& sched, const Vector& cond,
                                     const Vector& uncond, BasisMethod method, Eigen::Index n_c,
                                     const std::vector<int>& timesteps, std::span<const std::uint64_t> seeds,
                                     const SamplerConfig& sampler, const BasisFitConfig& config) {
  require(n_c >= 1 && n_c <= model.hidden_dim(), "n_c exceeds the activation dimension", "n_c");
  const Matrix acts =
      record_activations(model, sched, cond, uncond, seeds, timesteps, sampler.guidance_scale, sampler.steps);
  ActivationBasis basis = fit_basis(method, acts, n_c, config);
  basis.timesteps = timesteps;
  return basis;
}

Image sample_with_basis(const Denoiser& model, const NoiseSchedule& sched, const Vector& cond, const Vector& uncond,
                        const ActivationBasis& basis, const SamplerConfig& cfg) {
  require(basis.components.rows() == model.hidden_dim(), "basis does not match the model's hidden width", "basis");
  HiddenHook hook = [&](Matrix& hidden, std::span<const int>) { hidden = basis.reconstruct(hidden); };
  return sample_conditioned(model, sched, cond, uncond, cfg, &hook);
}

}  // namespace conceptor
