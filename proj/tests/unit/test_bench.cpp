#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "lee/bench/bench.hpp"
#include "lee/bench/latent.hpp"
#include "lee/expr/codec.hpp"
#include "toy_model.hpp"

using namespace lee;
using namespace lee::bench;
using expr::Expr;
using expr::Op;

namespace {

datagen::ScatterSet ramp(std::size_t n) {
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(i);
    y[i] = 0.1 * static_cast<double>(i);
  }
  return datagen::make_scatter(1, x, y);
}

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p;
}

ReportRecord rec(std::string ds, int trial, std::optional<double> r2, std::size_t c = 5) {
  ReportRecord r;
  r.dataset = std::move(ds);
  r.group = "g";
  r.trial = trial;
  r.r2_test = r2;
  if (r2) r.complexity = c;
  return r;
}

}  // namespace

TEST_CASE("split sizes and disjointness") {
  const auto data = ramp(100);
  const Splits s = split(data, 7);
  CHECK(s.train.rows() == 60);
  CHECK(s.val.rows() == 15);
  CHECK(s.test_rows() == 25);
  CHECK_THROWS_AS(s.test(), ProtocolViolation);

  Splits open = split(data, 7);
  open.release_test();
  std::multiset<double> all;
  for (const datagen::ScatterSet* f : {&std::as_const(open.train), &std::as_const(open.val), &open.test()}) all.insert(f->x.begin(), f->x.end());
  CHECK(all.size() == 100);
  CHECK(std::set<double>(all.begin(), all.end()).size() == 100);
  CHECK(open.test_reads() == 1);

  Splits other = split(data, 8);
  CHECK(other.train.x != s.train.x);
  CHECK_THROWS(split(ramp(9), 1));
}

TEST_CASE("noise") {
  const auto data = ramp(1000);
  Splits a = split(data, 3), b = split(data, 3);
  const auto before = a.train.y;
  Rng r0(1);
  add_noise(a, 0.0, r0);
  CHECK(a.train.y == before);

  // Range of train y is near 99.9 * 0.1; rescale so it is exactly 10.
  std::vector<double> y(a.train.rows(), 0.0);
  y[0] = 10.0;
  Splits c(datagen::make_scatter(1, std::vector<double>(y.size(), 0.0), y),
           datagen::make_scatter(1, std::vector<double>(2000, 0.0), std::vector<double>(2000, 0.0)), ramp(10));
  Rng r1(5);
  add_noise(c, 0.1, r1);
  double s = 0;
  for (double v : c.val.y) s += v * v;
  CHECK(std::sqrt(s / 2000.0) == doctest::Approx(1.0).epsilon(0.05));

  Rng r2a(9), r2b(9);
  add_noise(a, 0.1, r2a);
  add_noise(b, 0.1, r2b);
  CHECK(a.train.y == b.train.y);
}

TEST_CASE("r2 examples") {
  const std::vector<double> y{0, 1, 2};
  CHECK(r2(y, std::vector<double>{0, 1, 4}) == doctest::Approx(-1.0));
  CHECK(r2(y, y) == 1.0);
  CHECK(r2(y, std::vector<double>{1, 1, 1}) == doctest::Approx(0.0));
  CHECK(r2(std::vector<double>{2, 2}, std::vector<double>{2, 2}) == 1.0);
  CHECK(r2(std::vector<double>{2, 2}, std::vector<double>{2, 3}) == kDegenerateR2);
  CHECK(r2(y, std::vector<double>{0, NAN, 2}) == kDegenerateR2);

  // Permuting both vectors together leaves R^2 unchanged.
  const std::vector<double> a{3, -1, 4, 1, 5}, ah{2.5, -0.5, 4.2, 0.7, 5.5};
  const std::vector<double> p{5, 4, 3, -1, 1}, ph{5.5, 4.2, 2.5, -0.5, 0.7};
  CHECK(r2(a, ah) == doctest::Approx(r2(p, ph)).epsilon(1e-14));
}

TEST_CASE("read_dataset") {
  const auto p = write_temp("lee_ingest.csv",
                            "# truth = add x0 x1\n"
                            "x0,x1,y\n"
                            "1,2,3\n"
                            "4,nan,5\n"
                            "6\t7\t13\n"
                            "inf,1,2\n"
                            "bad,1,2\n"
                            "1,1\n"
                            "0.5 0.25 0.75\n");
  const Dataset ds = read_dataset(p);
  CHECK(ds.name == "lee_ingest");
  CHECK(ds.data.k == 2);
  CHECK(ds.data.rows() == 3);
  CHECK(ds.dropped_rows == 4);
  REQUIRE(ds.truth);
  CHECK(*ds.truth == "add x0 x1");
  CHECK(ds.data.y == std::vector<double>{3, 13, 0.75});

  CHECK_THROWS(read_dataset(write_temp("lee_bad.csv", "a,b,y\n1,2,3\n")));
  CHECK_THROWS(read_dataset(write_temp("lee_noy.csv", "x0,x1\n1,2\n")));
  CHECK_THROWS(read_dataset(std::filesystem::temp_directory_path() / "lee_missing_file.csv"));
}

TEST_CASE("aggregate") {
  SUBCASE("two trials") {
    const auto s = aggregate({rec("a", 0, 0.8), rec("a", 1, 0.9)});
    REQUIRE(s.size() == 1);
    CHECK(s[0].r2_mean == doctest::Approx(0.85));
    CHECK(s[0].r2_std == doctest::Approx(0.0707107).epsilon(1e-5));
  }
  SUBCASE("single trial") {
    const auto s = aggregate({rec("a", 0, 0.4)});
    CHECK(s[0].r2_std == 0.0);
    CHECK(s[0].r2_mean == doctest::Approx(0.4));
  }
  SUBCASE("nulls excluded and counted") {
    const auto s = aggregate({rec("a", 0, 0.8), rec("a", 1, std::nullopt), rec("a", 2, 0.6)});
    CHECK(s[0].r2_mean == doctest::Approx(0.7));
    CHECK(s[0].failures == 1);
    CHECK(s[0].trials == 2);
  }
  SUBCASE("mean over datasets of per-dataset means") {
    // a: (1.0, 0.0) -> 0.5; b: (0.2) -> 0.2; group 0.35
    const auto s = aggregate({rec("a", 0, 1.0), rec("a", 1, 0.0), rec("b", 0, 0.2)});
    CHECK(s[0].r2_mean == doctest::Approx(0.35));
    CHECK(s[0].datasets == 2);
  }
  SUBCASE("groups and eps separate") {
    auto r = rec("a", 0, 0.1);
    r.eps = 0.1;
    const auto s = aggregate({rec("a", 0, 0.8), r});
    CHECK(s.size() == 2);
  }
}

TEST_CASE("pareto front") {
  CHECK(pareto_front({{0.9, 10}, {0.8, 20}}) == std::vector<FrontPoint>{{0.9, 10}});
  CHECK(pareto_front({{0.9, 10}, {0.95, 50}}) == std::vector<FrontPoint>{{0.9, 10}, {0.95, 50}});
  CHECK(pareto_front({{0.9, 10}, {0.9, 10}}).size() == 1);
  CHECK(pareto_front({{0.9, 10}, {0.8, 10}}) == std::vector<FrontPoint>{{0.9, 10}});
  CHECK(pareto_front({}).empty());

  // Idempotent, order-independent, and matches a brute-force filter.
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<FrontPoint> pts;
    const int n = rng.uniform_int(1, 30);
    for (int i = 0; i < n; ++i) pts.push_back({std::round(rng.uniform() * 10) / 10, double(rng.uniform_int(1, 8))});
    const auto front = pareto_front(pts);
    CHECK(pareto_front(front) == front);
    auto shuffled = pts;
    rng.shuffle(shuffled);
    CHECK(pareto_front(shuffled) == front);

    std::set<std::pair<double, double>> brute;
    for (const auto& p : pts) {
      bool dominated = false;
      for (const auto& q : pts) {
        dominated = dominated || (q.r2 >= p.r2 && q.complexity <= p.complexity &&
                                  (q.r2 > p.r2 || q.complexity < p.complexity));
      }
      if (!dominated) brute.insert({p.complexity, p.r2});
    }
    std::set<std::pair<double, double>> got;
    for (const auto& p : front) got.insert({p.complexity, p.r2});
    CHECK(got == brute);
  }
}

TEST_CASE("report record json") {
  auto r = rec("feynman_1", 3, 0.75, 9);
  r.eps = 0.01;
  r.seed = 3000;
  r.mode = "pg";
  r.expr_text = "add x0 x1";
  const auto j = nlohmann::json::parse(to_json_line(r));
  for (const char* key : {"dataset", "eps", "trial", "seed", "mode", "r2_test", "complexity", "expr_text", "n_failures"})
    CHECK(j.contains(key));
  CHECK(j["r2_test"] == 0.75);
  const auto null_line = nlohmann::json::parse(to_json_line(rec("x", 0, std::nullopt)));
  CHECK(null_line["r2_test"].is_null());
  CHECK(null_line["complexity"].is_null());
}

TEST_CASE("plot export") {
  std::ostringstream out;
  write_front_csv({{0.9, 10}, {0.95, 50}}, out);
  CHECK(out.str() == "complexity,r2\n10,0.9\n50,0.95\n");
}

TEST_CASE("labelers") {
  const auto labelers = standard_labelers(2);
  REQUIRE(labelers.size() == 7);
  auto label = [&](const std::string& name, const Expr& e, int k) {
    for (const auto& l : labelers)
      if (l.name == name) return l.label(e, k);
    FAIL("no labeler " << name);
    return -1;
  };
  const Expr x0 = Expr::variable(0), x1 = Expr::variable(1);
  const Expr trig = Expr::binary(Op::Add, Expr::unary(Op::Sin, x0), x1);
  const Expr prod = Expr::binary(Op::Mul, x0, x1);
  CHECK(label("has-trig", trig, 2) == 1);
  CHECK(label("has-trig", prod, 2) == 0);
  CHECK(label("is-polynomial", prod, 2) == 1);
  CHECK(label("is-polynomial", trig, 2) == 0);
  CHECK(label("has-division", Expr::binary(Op::Div, x0, x1), 2) == 1);
  CHECK(label("has-sq-cube", Expr::unary(Op::Cube, x0), 1) == 1);
  CHECK(label("has-log-exp", Expr::unary(Op::Exp, x0), 1) == 1);
  CHECK(label("high-dim", x0, 1) == 0);
  CHECK(label("high-dim", prod, 2) == 1);
  CHECK(label("num-variables", prod, 2) == 2);
}

TEST_CASE("roc auc") {
  CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{0, 0, 1, 1}) == 0.0);
  CHECK(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) == 0.5);
  CHECK(roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 1, 0, 1}) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.1, 0.3, 0.35, 0.8}, std::vector<int>{0, 0, 1, 0}) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS(roc_auc(std::vector<double>{0.1}, std::vector<int>{1}));
}

TEST_CASE("linear probe") {
  Rng rng(11);
  const int n = 400, d = 8;
  tensor::Matrix x(n, d);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
    y[i] = x(i, 0) + 0.5 * x(i, 3) > 0;
    // Margin keeps the classes separable.
    x(i, 0) += y[i] ? 0.5 : -0.5;
  }
  const ProbeResult sep = linear_probe(x, y, ProbeTask::Binary);
  CHECK_FALSE(sep.skipped);
  CHECK(sep.n_test == 80);
  CHECK(sep.accuracy == 1.0);
  REQUIRE(sep.auc);
  CHECK(*sep.auc == 1.0);

  // Label-shuffled null, averaged over reshuffles.
  double mean_auc = 0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    auto shuffled = y;
    Rng srng(100 + r);
    srng.shuffle(shuffled);
    ProbeConfig cfg;
    cfg.seed = r;
    mean_auc += *linear_probe(x, shuffled, ProbeTask::Binary, cfg).auc;
  }
  CHECK(std::abs(mean_auc / reps - 0.5) < 0.05);

  std::vector<int> one(n, 1);
  const ProbeResult skip = linear_probe(x, one, ProbeTask::Binary);
  CHECK(skip.skipped);
  CHECK_FALSE(skip.auc);

  // Multiclass: three clusters.
  tensor::Matrix xm(300, 2);
  std::vector<int> ym(300);
  for (int i = 0; i < 300; ++i) {
    ym[i] = 1 + i % 3;
    xm(i, 0) = 4.0 * (ym[i] - 2) + 0.3 * rng.normal();
    xm(i, 1) = rng.normal();
  }
  const ProbeResult multi = linear_probe(xm, ym, ProbeTask::Multiclass);
  CHECK(multi.classes == 3);
  CHECK_FALSE(multi.auc);
  CHECK(multi.accuracy > 0.95);

  CHECK_THROWS(linear_probe(xm, y, ProbeTask::Binary));
  CHECK_THROWS(linear_probe(xm, ym, ProbeTask::Binary));
}

TEST_CASE("encode_records matches encode_one") {
  const auto& m = testing::toy_model();
  datagen::GrammarConfig g;
  g.k_max = 2;
  datagen::CorpusOptions opts;
  opts.n_total = 40;
  opts.seed = 9;
  const auto corpus = datagen::build_corpus(g, opts);
  std::vector<const datagen::CorpusRecord*> recs;
  for (const auto& r : corpus.records) recs.push_back(&r);
  const auto z = encode_records(m, recs, 7);
  REQUIRE(z.rows() == static_cast<Eigen::Index>(recs.size()));
  for (std::size_t i = 0; i < recs.size(); i += 5) {
    const auto tokens = expr::tokenize(expr::parse_text(recs[i]->text));
    const auto one = m.encode_one(tokens, recs[i]->scatter, false, nullptr).mu;
    for (std::size_t j = 0; j < one.size(); ++j) CHECK(z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == doctest::Approx(one[j]).epsilon(1e-10));
  }
}

TEST_CASE("interpolation path") {
  const auto& m = testing::toy_model();
  const Expr a = Expr::binary(Op::Add, Expr::variable(0), Expr::constant(1.0));
  const Expr b = Expr::unary(Op::Sin, Expr::variable(0));
  Rng rng(3);
  datagen::GrammarConfig g;
  const auto sa = datagen::sample_scatter(a, rng, 64, 1, g);
  const auto sb = datagen::sample_scatter(b, rng, 64, 1, g);
  const auto grid = datagen::query_grid(1, -10, 10);
  const expr::MatrixView q{grid, grid.size(), 1};

  InterpConfig cfg;
  cfg.seed = 4;
  const auto steps = interpolate(m, a, sa, b, sb, q, cfg);
  REQUIRE(steps.size() == 4);
  const auto za = m.encode_one(expr::tokenize(a), sa, false, nullptr).mu;
  const auto zb = m.encode_one(expr::tokenize(b), sb, false, nullptr).mu;
  for (const auto& s : steps) {
    for (std::size_t i = 0; i < za.size(); ++i) CHECK(s.z[i] == (1 - s.t) * za[i] + s.t * zb[i]);
    CHECK(s.parsed <= 32);
    if (s.best) CHECK(std::isfinite(s.mae));
  }
  CHECK(steps[0].z == za);
  CHECK(steps[3].z == zb);

  const auto again = interpolate(m, a, sa, b, sb, q, cfg);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    CHECK(steps[i].mae == again[i].mae);
    CHECK(steps[i].best.has_value() == again[i].best.has_value());
  }
}
