#include "lee/search/search.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lee/constfit/constfit.hpp"
#include "lee/expr/codec.hpp"
#include "lee/expr/simplify.hpp"
#include "lee/search/cmaes.hpp"

namespace lee::search {

using tensor::Matrix;
using tensor::Tensor;

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::Iterative: return "iter";
    case Mode::Gradient: return "grad";
    case Mode::Combined: return "pg";
    case Mode::OneShot: return "oneshot";
    case Mode::Cmaes: return "cmaes";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : {Mode::Iterative, Mode::Gradient, Mode::Combined, Mode::OneShot, Mode::Cmaes}) {
    if (mode_name(m) == name) return m;
  }
  return std::nullopt;
}

void SearchConfig::validate() const {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  need(rounds >= 1, "search.rounds must be >= 1");
  need(iterations >= 0, "search.iterations must be >= 0");
  need(pool_size >= 1 && n_init >= 1 && n_new >= 1 && batch >= 1, "search: pool_size, n_init, n_new, batch >= 1");
  need(refresh_period >= 1 && grad_period >= 1 && grad_decode_period >= 1, "search: periods must be >= 1");
  need(encode_rows >= 1 && score_rows >= 2 && lbfgs_rows >= 1, "search: row caps too small");
  need(lbfgs_min >= 1 && lbfgs_min <= lbfgs_max, "search: need 1 <= lbfgs_min <= lbfgs_max");
  need(temperature >= 0 && alpha >= 0 && grad_lr >= 0 && grad_prox >= 0, "search: negative rate or weight");
  need(cma_population >= 2, "search.cma_population must be >= 2");
}

// ---------------------------------------------------------------------------

LatentDescent::LatentDescent(const model::Model& m, std::vector<double> anchor, const datagen::ScatterSet& rows,
                             double lr, double prox, std::vector<double> start)
    : model_(m), anchor_(std::move(anchor)), lr_(lr), prox_(prox) {
  z_ = start.empty() ? anchor_ : std::move(start);
  if (z_.size() != anchor_.size()) throw std::invalid_argument("LatentDescent: start and anchor differ in size");
  m_.assign(z_.size(), 0.0);
  v_.assign(z_.size(), 0.0);
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    if (std::isfinite(rows.y[r])) keep.push_back(r);
  }
  rows_ = rows.select_rows(keep);
}

double LatentDescent::evaluate(std::vector<double>* grad) const {
  if (rows_.rows() == 0) return std::numeric_limits<double>::infinity();
  const auto d = static_cast<tensor::Index>(z_.size());
  tensor::FreezeParamsGuard freeze;
  const Tensor z = Tensor::variable(Eigen::Map<const Matrix>(z_.data(), 1, d));
  const auto view = rows_.view();
  const Tensor pred = model_.eval(z, std::span<const expr::MatrixView>(&view, 1));
  const auto n = static_cast<tensor::Index>(rows_.rows());
  const Tensor y = Tensor::constant(Eigen::Map<const Matrix>(rows_.y.data(), n, 1));
  const Tensor a = Tensor::constant(Eigen::Map<const Matrix>(anchor_.data(), 1, d));
  const Tensor loss = add(tensor::sum(tensor::square(tensor::sub(pred, y))),
                          tensor::scale(tensor::sum(tensor::square(tensor::sub(z, a))), prox_));
  const double value = loss.item();
  if (grad && std::isfinite(value)) {
    tensor::backward(loss);
    grad->assign(z.grad().data(), z.grad().data() + d);
  }
  return value;
}

double LatentDescent::objective() const { return evaluate(nullptr); }

double LatentDescent::step() {
  std::vector<double> g;
  const double value = evaluate(&g);
  if (!std::isfinite(value)) return value;
  ++t_;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_)), c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < z_.size(); ++i) {
    m_[i] = b1 * m_[i] + (1 - b1) * g[i];
    v_[i] = b2 * v_[i] + (1 - b2) * g[i] * g[i];
    z_[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
  }
  return value;
}

GradientResult gradient_refine(const model::Model& m, const std::vector<double>& anchor,
                               const datagen::ScatterSet& rows, const SearchConfig& cfg) {
  LatentDescent descent(m, anchor, rows, cfg.grad_lr, cfg.grad_prox);
  GradientResult out;
  out.objective_start = descent.objective();
  bool finite = std::isfinite(out.objective_start);
  for (int s = 0; s < cfg.grad_steps && finite; ++s) finite = std::isfinite(descent.step());
  out.objective_end = finite ? descent.objective() : std::numeric_limits<double>::quiet_NaN();
  finite = finite && std::isfinite(out.objective_end) &&
           std::all_of(descent.z().begin(), descent.z().end(), [](double v) { return std::isfinite(v); });
  if (finite) {
    out.z = descent.z();
  } else {
    out.z = anchor;
    out.reverted = true;
    out.objective_end = out.objective_start;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

datagen::ScatterSet finite_rows(const datagen::ScatterSet& s) {
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    if (std::isfinite(s.y[r])) keep.push_back(r);
  }
  return s.select_rows(keep);
}

double r2_on(const expr::Expr& e, const datagen::ScatterSet& s) {
  if (s.rows() < 2) return std::numeric_limits<double>::quiet_NaN();
  return bench::r2(s.y, expr::evaluate(e, s.view()).y);
}

/// State shared by every mode within one round.
class Round {
 public:
  Round(const model::Model& m, const SearchConfig& cfg, const bench::Splits& splits, std::uint64_t seed,
        int round_index)
      : model_(m),
        cfg_(cfg),
        train_(finite_rows(splits.train)),
        val_(finite_rows(splits.val)),
        rng_(mix_seed(seed, seed_stream::kShuffle)),
        decode_rng_(mix_seed(seed, seed_stream::kDecode)),
        fit_seed_(mix_seed(seed, seed_stream::kFit)) {
    cfg_.validate();
    if (train_.rows() < 2) throw RoundFailure("training fold has fewer than two finite rows");
    if (train_.k > static_cast<std::size_t>(m.config().k_max)) {
      throw RoundFailure("dataset has " + std::to_string(train_.k) + " variables; the checkpoint accepts at most " +
                         std::to_string(m.config().k_max));
    }
    Rng score_rng(mix_seed(seed, seed_stream::kScoring));
    score_rows_ = constfit::subsample_rows(train_, static_cast<std::size_t>(cfg_.score_rows), score_rng);
    encoder_rows_ = constfit::subsample_rows(train_, static_cast<std::size_t>(cfg_.encode_rows), rng_);
    budget_ = constfit::budget_for_round(round_index, cfg_.rounds, cfg_.lbfgs_min, cfg_.lbfgs_max);
  }

  RoundResult& result() { return result_; }
  const datagen::ScatterSet& encoder_rows() const { return encoder_rows_; }
  Rng& rng() { return rng_; }

  std::vector<double> scatter_only_latent() const {
    return model_.encode_one({}, encoder_rows_, false, nullptr).mu;
  }

  std::vector<double> latent_of(const Candidate& c, bool sample) {
    const expr::TokenSeq tokens = expr::tokenize(expr::parse_text(c.text));
    return model_.encode_one(tokens, encoder_rows_, sample, sample ? &rng_ : nullptr).z;
  }

  /// Decodes `count` sequences from one latent; the first `greedy` are argmax.
  std::vector<model::Generated> decode(const std::vector<double>& z, int count, int greedy) {
    const auto d = static_cast<tensor::Index>(z.size());
    Matrix zs(count, d);
    for (int i = 0; i < count; ++i) zs.row(i) = Eigen::Map<const Eigen::RowVectorXd>(z.data(), d);
    return decode_rows(zs, greedy);
  }

  std::vector<model::Generated> decode_rows(const Matrix& zs, int greedy) {
    std::vector<double> temps(static_cast<std::size_t>(zs.rows()), cfg_.temperature);
    for (int i = 0; i < greedy && i < static_cast<int>(temps.size()); ++i) temps[static_cast<std::size_t>(i)] = 0.0;
    return model_.generate(zs, temps, decode_rng_, cfg_.max_len);
  }

  /// Parse, dedup, fit and score; aligned with the input (nullopt when the
  /// decode is unusable).
  std::vector<std::optional<Candidate>> realize(const std::vector<model::Generated>& gen, Origin origin,
                                                int iteration) {
    std::vector<std::optional<Candidate>> out(gen.size());
    std::vector<std::string> keys(gen.size());
    std::vector<std::pair<std::string, expr::Expr>> todo;
    std::map<std::string, std::size_t> pending;
    for (std::size_t i = 0; i < gen.size(); ++i) {
      const auto parsed = expr::try_parse(gen[i].tokens);
      if (!parsed || parsed.expr->max_variable() >= static_cast<int>(train_.k)) {
        ++result_.unparseable;
        continue;
      }
      keys[i] = expr::to_text(expr::strip_framing(gen[i].tokens));
      if (cache_.count(keys[i]) || pending.count(keys[i])) continue;
      pending[keys[i]] = todo.size();
      todo.emplace_back(keys[i], *parsed.expr);
    }

    std::vector<std::optional<Candidate>> fitted(todo.size());
    const std::uint64_t base = fit_counter_;
    fit_counter_ += todo.size();
#pragma omp parallel for schedule(dynamic)
    for (std::size_t j = 0; j < todo.size(); ++j) {
      Rng fit_rng(mix_seed(fit_seed_, base + j));
      constfit::FitConfig fc;
      fc.row_cap = static_cast<std::size_t>(cfg_.lbfgs_rows);
      const auto fit = constfit::fit_constants(todo[j].second, train_, budget_, fit_rng, fc);
      Candidate c{fit.expr};
      c.text = expr::canonical_text(fit.expr);
      c.complexity = expr::complexity(fit.expr);
      c.r2_train = r2_on(fit.expr, score_rows_);
      c.r2_val = r2_on(fit.expr, val_);
      c.score = score_value(c.r2_train, c.complexity, cfg_.alpha);
      fitted[j] = std::move(c);
    }
    for (std::size_t j = 0; j < todo.size(); ++j) cache_.emplace(todo[j].first, *fitted[j]);

    for (std::size_t i = 0; i < gen.size(); ++i) {
      if (keys[i].empty()) continue;
      Candidate c = cache_.at(keys[i]);
      c.origin = origin;
      c.iteration = iteration;
      note_seen(c);
      out[i] = std::move(c);
    }
    return out;
  }

  static std::vector<Candidate> usable(std::vector<std::optional<Candidate>> v) {
    std::vector<Candidate> out;
    for (auto& c : v) {
      if (c) out.push_back(std::move(*c));
    }
    return out;
  }

  std::vector<Candidate> decode_and_realize(const std::vector<double>& z, int count, int greedy, Origin origin,
                                            int iteration, std::size_t* counter) {
    const auto gen = decode(z, count, greedy);
    *counter += gen.size();
    return usable(realize(gen, origin, iteration));
  }

  Pool init_pool(int count) {
    Pool pool(static_cast<std::size_t>(cfg_.pool_size));
    const auto z0 = scatter_only_latent();
    auto cands = decode_and_realize(z0, count, 1, Origin::Init, 0, &result_.decodes);
    if (cands.empty()) cands = decode_and_realize(z0, count, 0, Origin::Init, 0, &result_.decodes);
    if (cands.empty()) {
      throw RoundFailure("no parseable candidate in " + std::to_string(2 * count) + " initial decodes");
    }
    pool.merge(std::move(cands));
    return pool;
  }

  std::vector<Candidate> iterate_step(const Candidate& parent, int iteration) {
    return decode_and_realize(latent_of(parent, true), cfg_.n_new, 0, Origin::Iter, iteration, &result_.decodes);
  }

  std::vector<Candidate> refresh(int iteration) {
    encoder_rows_ = constfit::subsample_rows(train_, static_cast<std::size_t>(cfg_.encode_rows), rng_);
    auto fresh = decode_and_realize(scatter_only_latent(), cfg_.refresh_decodes, 0, Origin::Refresh, iteration,
                                    &result_.decodes);
    result_.refresh_injections += fresh.size();
    return fresh;
  }

  std::vector<Candidate> gradient_segment(const Pool& pool, int iteration) {
    ++result_.gradient_segments;
    // The champion's latent with its constants as they stand.
    const auto anchor = latent_of(pool.best(), false);
    const auto g = gradient_refine(model_, anchor, encoder_rows_, cfg_);
    return decode_and_realize(g.z, 1, 1, Origin::Grad, iteration, &result_.gradient_decodes);
  }

  void log(const Pool& pool, int iteration) {
    const Candidate& b = pool.best();
    result_.log.push_back({iteration, b.score, b.r2_train, b.complexity});
  }

  /// Best validation R^2 among everything realized this round.
  const std::optional<Candidate>& best_seen() const { return best_seen_; }

  const SearchConfig& cfg() const { return cfg_; }
  const model::Model& model() const { return model_; }

 private:
  void note_seen(const Candidate& c) {
    if (!best_seen_ || c.r2_val > best_seen_->r2_val ||
        (c.r2_val == best_seen_->r2_val && ranks_before(c, *best_seen_))) {
      best_seen_ = c;
    }
  }

  const model::Model& model_;
  SearchConfig cfg_;
  datagen::ScatterSet train_, val_, score_rows_, encoder_rows_;
  Rng rng_, decode_rng_;
  std::uint64_t fit_seed_;
  std::uint64_t fit_counter_ = 0;
  int budget_ = 100;
  std::map<std::string, Candidate> cache_;
  std::optional<Candidate> best_seen_;
  RoundResult result_;
};

void finish_from_pool(Round& round, const Pool& pool) {
  if (const Candidate* w = pool.best_validation()) round.result().winner = *w;
}

void pool_search(Round& round, Mode mode) {
  const SearchConfig& cfg = round.cfg();
  RoundResult& res = round.result();
  Pool pool = round.init_pool(cfg.n_init);
  std::optional<Candidate> iter_champion = *pool.best_validation();
  auto snapshot = [&] { iter_champion = *pool.best_validation(); };

  if (mode == Mode::Gradient) {
    LatentDescent descent(round.model(), round.scatter_only_latent(), round.encoder_rows(), cfg.grad_lr,
                          cfg.grad_prox);
    for (int it = 1; it <= cfg.iterations; ++it) {
      if (!std::isfinite(descent.step())) break;
      if (it % cfg.grad_decode_period == 0) {
        ++res.gradient_segments;
        pool.merge(round.decode_and_realize(descent.z(), 1, 1, Origin::Grad, it, &res.gradient_decodes));
      }
      round.log(pool, it);
    }
    finish_from_pool(round, pool);
    return;
  }

  std::vector<Candidate> parent_copies;
  int batches = 0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    const int slot = (it - 1) % cfg.batch;
    if (slot == 0) {
      parent_copies.clear();
      for (const Candidate* p : select_parents(pool, cfg.batch, round.rng())) parent_copies.push_back(*p);
    }
    pool.merge(round.iterate_step(parent_copies[static_cast<std::size_t>(slot)], it));
    if (slot == cfg.batch - 1 && ++batches % cfg.refresh_period == 0) pool.merge(round.refresh(it));
    snapshot();
    if (mode == Mode::Combined && it % cfg.grad_period == 0) pool.merge(round.gradient_segment(pool, it));
    round.log(pool, it);
  }

  finish_from_pool(round, pool);
  if (mode == Mode::Combined || mode == Mode::Iterative) res.iter_champion_val = iter_champion->r2_val;
  // Safety fallback: never report below the latest iterative pool champion.
  if (mode == Mode::Combined && res.winner && res.winner->r2_val < iter_champion->r2_val) {
    res.winner = iter_champion;
    res.fallback_applied = true;
  }
}

void oneshot(Round& round) {
  const SearchConfig& cfg = round.cfg();
  Pool pool = round.init_pool(cfg.n_init + cfg.iterations * cfg.n_new);
  finish_from_pool(round, pool);
}

void cmaes(Round& round, std::uint64_t seed) {
  const SearchConfig& cfg = round.cfg();
  RoundResult& res = round.result();
  Pool pool = round.init_pool(cfg.n_init);
  const std::size_t budget = static_cast<std::size_t>(cfg.n_init + cfg.iterations * cfg.n_new);

  // Step size from the spread of the pool's latents.
  const auto z0 = round.scatter_only_latent();
  const auto d = static_cast<Eigen::Index>(z0.size());
  double spread = 0.0;
  if (pool.size() >= 2) {
    Eigen::MatrixXd lat(static_cast<Eigen::Index>(pool.size()), d);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto z = round.latent_of(pool.ranked()[i], false);
      lat.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(z.data(), d);
    }
    const Eigen::RowVectorXd mean = lat.colwise().mean();
    const Eigen::RowVectorXd var = (lat.rowwise() - mean).array().square().colwise().sum() /
                                   static_cast<double>(pool.size() - 1);
    spread = var.array().sqrt().mean();
  }
  const double sigma0 = cfg.cma_sigma_scale * std::max(cfg.cma_sigma_floor, spread);
  Cmaes es(Eigen::Map<const Eigen::VectorXd>(z0.data(), d), sigma0, cfg.cma_population,
           mix_seed(seed, seed_stream::kInit));
  const double worst = -1.0 - cfg.alpha * cfg.cma_penalty_complexity;

  int generation = 0;
  while (res.decodes < budget) {
    const auto& xs = es.ask();
    const std::size_t take = std::min<std::size_t>(xs.size(), budget - res.decodes);
    Matrix zs(static_cast<Eigen::Index>(take), d);
    for (std::size_t i = 0; i < take; ++i) zs.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    const auto gen = round.decode_rows(zs, static_cast<int>(take));
    res.decodes += gen.size();
    auto realized = round.realize(gen, Origin::Cma, ++generation);
    std::vector<double> fitness;
    for (const auto& c : realized) fitness.push_back(c ? -c->score : -worst);
    pool.merge(Round::usable(std::move(realized)));
    round.log(pool, generation);
    if (take < xs.size()) break;
    es.tell(fitness);
  }
  res.winner = round.best_seen();
}

}  // namespace

RoundResult run_round(Mode mode, const bench::Splits& splits, const model::Model& m, const SearchConfig& cfg,
                      std::uint64_t seed, int round_index) {
  try {
    Round round(m, cfg, splits, seed, round_index);
    try {
      switch (mode) {
        case Mode::Iterative:
        case Mode::Gradient:
        case Mode::Combined: pool_search(round, mode); break;
        case Mode::OneShot: oneshot(round); break;
        case Mode::Cmaes: cmaes(round, seed); break;
      }
    } catch (const RoundFailure& e) {
      round.result().failed = true;
      round.result().diagnostic = e.what();
    }
    RoundResult out = std::move(round.result());
    if (!out.winner && !out.failed) {
      out.failed = true;
      out.diagnostic = "no valid candidate";
    }
    return out;
  } catch (const RoundFailure& e) {
    RoundResult out;
    out.failed = true;
    out.diagnostic = e.what();
    return out;
  }
}

RoundResult baseline_oneshot(const bench::Splits& splits, const model::Model& m, const SearchConfig& cfg,
                             std::uint64_t seed, int round_index) {
  return run_round(Mode::OneShot, splits, m, cfg, seed, round_index);
}

RoundResult baseline_cmaes(const bench::Splits& splits, const model::Model& m, const SearchConfig& cfg,
                           std::uint64_t seed, int round_index) {
  return run_round(Mode::Cmaes, splits, m, cfg, seed, round_index);
}

TrialResult run_trial(const bench::Dataset& data, double eps, const model::Model& m, const SearchConfig& cfg,
                      Mode mode, int trial, std::uint64_t s_base, const bench::ProtocolConfig& protocol,
                      int workers) {
  TrialResult out;
  out.trial = trial;
  out.mode = mode;
  out.seed = bench::trial_seed(s_base, trial);
  bench::Splits splits = bench::split(data.data, out.seed, protocol);
  Rng noise(mix_seed(out.seed, seed_stream::kNoise));
  bench::add_noise(splits, eps, noise);

  out.rounds.resize(static_cast<std::size_t>(cfg.rounds));
#pragma omp parallel for schedule(dynamic) num_threads(std::max(workers, 1)) if (workers > 1)
  for (int r = 0; r < cfg.rounds; ++r) {
    out.rounds[static_cast<std::size_t>(r)] =
        run_round(mode, splits, m, cfg, mix_seed(out.seed, seed_stream::kRound + static_cast<std::uint64_t>(r)), r + 1);
  }
  for (const auto& r : out.rounds) {
    if (r.failed || !r.winner) {
      ++out.failed_rounds;
      continue;
    }
    if (!out.winner || r.winner->r2_val > out.winner->r2_val) out.winner = r.winner;
  }
  if (!out.winner) return out;

  splits.release_test();
  const datagen::ScatterSet& test = splits.test();
  out.r2_test = bench::r2(test.y, expr::evaluate(out.winner->expr, test.view()).y);
  out.complexity = out.winner->complexity;
  return out;
}

}  // namespace lee::search
