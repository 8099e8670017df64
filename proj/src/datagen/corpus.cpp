#include "lee/datagen/corpus.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <fmt/format.h>

#include "lee/expr/codec.hpp"
#include "lee/util/fields.hpp"

namespace lee::datagen {

namespace {

constexpr std::string_view kMagic = "LEE-CORPUS v1";

std::string config_echo(const GrammarConfig& cfg, const CorpusOptions& opts) {
  std::string s;
  util::echo_fields(cfg, "grammar", s);
  util::echo_fields(opts, "data", s);
  s += fmt::format("seed = {}\n", opts.seed);
  return s;
}

void append_hex(std::string& out, double v) {
  char buf[17];
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(bits));
  out.append(buf, 16);
}

double parse_hex(std::string_view s) {
  std::uint64_t bits = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), bits, 16);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::runtime_error("bad hex double");
  return std::bit_cast<double>(bits);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

std::vector<const CorpusRecord*> Corpus::split(Split s) const {
  std::vector<const CorpusRecord*> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

std::uint64_t record_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Corpus build_corpus(const GrammarConfig& cfg, const CorpusOptions& opts) {
  cfg.validate();
  const int k_max = opts.k_max > 0 ? opts.k_max : cfg.k_max;
  if (opts.k_min < 1 || opts.k_min > k_max || k_max > cfg.k_max) {
    throw std::invalid_argument("build_corpus: need 1 <= k_min <= k_max <= grammar.k_max");
  }
  const auto n = static_cast<std::ptrdiff_t>(opts.n_total);
  std::vector<CorpusRecord> drawn(opts.n_total);
  std::vector<char> relaxed(opts.n_total, 0);

#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(mix_seed(opts.seed, seed_stream::kData), static_cast<std::uint64_t>(i)));
    const int k = rng.uniform_int(opts.k_min, k_max);
    SampleStats stats;
    const expr::Expr e = sample_expression(rng, cfg, k, &stats);
    // Stored constants are the 3-significant-figure values the text carries.
    const expr::Expr stored = expr::parse_text(expr::canonical_text(e));
    CorpusRecord& r = drawn[static_cast<std::size_t>(i)];
    r.text = expr::canonical_text(stored);
    r.k = k;
    r.scatter = sample_scatter(stored, rng, static_cast<std::size_t>(cfg.n_scatter), k, cfg);
    r.scatter.provenance = fmt::format("expr:{:016x}", record_hash(r.text));
    relaxed[static_cast<std::size_t>(i)] = stats.coverage_relaxed;
  }

  Corpus c;
  c.k_max = k_max;
  c.n_scatter = cfg.n_scatter;
  c.config_echo = config_echo(cfg, opts);
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < drawn.size(); ++i) {
    if (!seen.insert(drawn[i].text).second) {
      ++c.duplicates;
      continue;
    }
    c.coverage_relaxed += relaxed[i] != 0;
    c.records.push_back(std::move(drawn[i]));
  }
  std::sort(c.records.begin(), c.records.end(), [](const CorpusRecord& a, const CorpusRecord& b) {
    const auto ha = record_hash(a.text), hb = record_hash(b.text);
    return ha != hb ? ha < hb : a.text < b.text;
  });
  const std::size_t total = c.records.size();
  const std::size_t n_train = total * 8 / 10;
  const std::size_t n_val = total / 10;
  for (std::size_t i = 0; i < total; ++i) {
    c.records[i].split = i < n_train ? Split::Train : i < n_train + n_val ? Split::Val : Split::Test;
  }
  return c;
}

std::string encode_record(const CorpusRecord& r) {
  const ScatterSet& s = r.scatter;
  std::string out = r.text;
  out += fmt::format(" | {} {} ", r.k, s.rows());
  out.reserve(out.size() + (s.x.size() + s.y.size()) * 16);
  for (double v : s.x) append_hex(out, v);
  for (double v : s.y) append_hex(out, v);
  return out;
}

CorpusRecord decode_record(std::string_view line, Split split) {
  const auto bar = line.find(" | ");
  if (bar == std::string_view::npos) throw std::runtime_error("missing ' | ' separator");
  CorpusRecord r;
  r.text = std::string(trim(line.substr(0, bar)));
  r.split = split;
  std::istringstream rest{std::string(line.substr(bar + 3))};
  std::size_t n = 0;
  std::string block;
  if (!(rest >> r.k >> n)) throw std::runtime_error("missing k / n fields");
  rest >> block;
  if (r.k < 1 || r.k > expr::kMaxVariables) throw std::runtime_error("k out of range");
  const std::size_t k = static_cast<std::size_t>(r.k);
  if (block.size() != n * (k + 1) * 16) throw std::runtime_error("hex block has the wrong length");
  std::vector<double> x(n * k), y(n);
  std::string_view b = block;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = parse_hex(b.substr(i * 16, 16));
  for (std::size_t i = 0; i < n; ++i) y[i] = parse_hex(b.substr((x.size() + i) * 16, 16));
  r.scatter = make_scatter(k, std::move(x), std::move(y), fmt::format("expr:{:016x}", record_hash(r.text)));
  return r;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    const auto path = dir / (std::string(split_name(s)) + ".lee");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << kMagic << " k_max=" << corpus.k_max << " n_scatter=" << corpus.n_scatter << '\n';
    std::istringstream echo(corpus.config_echo);
    for (std::string line; std::getline(echo, line);) out << "# " << line << '\n';
    out << "# split = " << split_name(s) << '\n';
    for (const auto& r : corpus.records) {
      if (r.split == s) out << encode_record(r) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
  }
}

Corpus read_corpus(const std::filesystem::path& dir) {
  Corpus c;
  bool any = false;
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    const auto path = dir / (std::string(split_name(s)) + ".lee");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& why) {
      throw std::runtime_error(fmt::format("{}:{}: {}", path.string(), lineno, why));
    };
    ++lineno;
    if (!std::getline(in, line) || line.rfind(kMagic, 0) != 0) fail("missing LEE-CORPUS v1 header");
    int k_max = 0, n_scatter = 0;
    if (std::sscanf(line.c_str(), "LEE-CORPUS v1 k_max=%d n_scatter=%d", &k_max, &n_scatter) != 2) {
      fail("malformed header");
    }
    if (any && (k_max != c.k_max || n_scatter != c.n_scatter)) fail("header disagrees with other split files");
    c.k_max = k_max;
    c.n_scatter = n_scatter;
    const bool first = !any;
    any = true;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (line[0] == '#') {
        if (first && line.rfind("# split =", 0) != 0) c.config_echo += line.substr(line.size() > 1 ? 2 : 1) + "\n";
        continue;
      }
      try {
        c.records.push_back(decode_record(line, s));
      } catch (const std::exception& e) {
        fail(e.what());
      }
    }
  }
  if (!any) throw std::runtime_error("no corpus split files under " + dir.string());
  return c;
}

}  // namespace lee::datagen
