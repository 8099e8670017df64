#pragma once

#include <cstddef>

namespace lee::search {

struct SearchConfig {
  int rounds = 10;        // R
  int iterations = 200;   // T; one parent and n_new decodes each
  int pool_size = 16;     // P
  int n_init = 32;
  int n_new = 3;
  int batch = 5;           // parents drawn together
  int refresh_period = 5;  // batches between scatter refreshes
  int refresh_decodes = 3;
  int encode_rows = 200;   // scatter rows handed to the encoder
  double alpha = 0.002;
  double temperature = 0.7;
  int grad_steps = 50;
  double grad_lr = 5e-3;
  double grad_prox = 0.1;
  int grad_period = 25;         // iterations between gradient segments (combined)
  int grad_decode_period = 25;  // steps between decodes (gradient mode)
  int lbfgs_min = 100;
  int lbfgs_max = 300;
  int lbfgs_rows = 1000;
  int score_rows = 2000;
  int cma_population = 24;
  double cma_sigma_scale = 0.3;
  double cma_sigma_floor = 0.1;
  int cma_penalty_complexity = 50;
  int max_len = 0;  // 0: the model's limit

  void validate() const;

  template <class F>
  void fields(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void fields(F&& f) const {
    visit(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit(Self& s, F& f) {
    f("rounds", s.rounds);
    f("iterations", s.iterations);
    f("pool_size", s.pool_size);
    f("n_init", s.n_init);
    f("n_new", s.n_new);
    f("batch", s.batch);
    f("refresh_period", s.refresh_period);
    f("refresh_decodes", s.refresh_decodes);
    f("encode_rows", s.encode_rows);
    f("alpha", s.alpha);
    f("temperature", s.temperature);
    f("grad_steps", s.grad_steps);
    f("grad_lr", s.grad_lr);
    f("grad_prox", s.grad_prox);
    f("grad_period", s.grad_period);
    f("grad_decode_period", s.grad_decode_period);
    f("lbfgs_min", s.lbfgs_min);
    f("lbfgs_max", s.lbfgs_max);
    f("lbfgs_rows", s.lbfgs_rows);
    f("score_rows", s.score_rows);
    f("cma_population", s.cma_population);
    f("cma_sigma_scale", s.cma_sigma_scale);
    f("cma_sigma_floor", s.cma_sigma_floor);
    f("cma_penalty_complexity", s.cma_penalty_complexity);
    f("max_len", s.max_len);
  }
};

}  // namespace lee::search
