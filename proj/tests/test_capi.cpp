#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "nrl/nrl.h"

namespace {

struct Fixture {
  nrl_target* target = nullptr;
  nrl_dataset* data = nullptr;

  Fixture() {
    const double w0[] = {1.0, 1.0};
    REQUIRE(nrl_target_create(1.0, w0, 2, "tanh", &target) == NRL_OK);
    REQUIRE(nrl_dataset_create(target, "even", 6, 1, 1, -2.0, 2.0, 0, &data) == NRL_OK);
  }
  ~Fixture() {
    nrl_dataset_free(data);
    nrl_target_free(target);
  }
};

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("nrl_capi_" + std::to_string(::getpid()) + "_" + name)).string();
}

}  // namespace

TEST_CASE("version and status strings") {
  CHECK(std::strlen(nrl_version()) > 0);
  CHECK(std::string(nrl_status_string(NRL_OK)) == "ok");
  CHECK(std::string(nrl_status_string(NRL_ERR_CONFIG)) == "config error");
}

TEST_CASE("invalid input reports a code and a message") {
  const double w0[] = {1.0, 1.0};
  nrl_target* t = nullptr;
  CHECK(nrl_target_create(0.0, w0, 2, "tanh", &t) == NRL_ERR_INVALID_INPUT);
  CHECK(t == nullptr);
  CHECK(std::strlen(nrl_last_error()) > 0);
  CHECK(nrl_target_create(1.0, w0, 2, "relu", &t) == NRL_ERR_INVALID_INPUT);
  CHECK(nrl_target_create(1.0, nullptr, 2, "tanh", &t) == NRL_ERR_INVALID_INPUT);
  CHECK(nrl_target_create(1.0, w0, 2, "tanh", &t) == NRL_OK);
  CHECK(std::string(nrl_last_error()).empty());
  nrl_target_free(t);
}

TEST_CASE("gamma and spectrum") {
  Fixture f;
  double g[2], norm = 0.0;
  REQUIRE(nrl_gamma(f.data, g, 2, &norm) == NRL_OK);
  CHECK(g[0] == doctest::Approx(5.0603607920743086).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(2.434229622737811).epsilon(1e-14));
  CHECK(norm == doctest::Approx(5.615400716082262).epsilon(1e-14));
  CHECK(nrl_gamma(f.data, g, 3, &norm) == NRL_ERR_INVALID_INPUT);

  nrl_spectrum s{};
  REQUIRE(nrl_hessian_spectrum(f.data, "tanh", 2, &s) == NRL_OK);
  CHECK(s.mu1 == doctest::Approx(norm).epsilon(1e-12));
  CHECK(s.mu2 == 0.0);
  CHECK(s.top_eigenspace_dim == 2);
  CHECK(s.rate_exponent == doctest::Approx(0.5));
}

TEST_CASE("loss and gradient match the frozen values") {
  Fixture f;
  const double flat[] = {0.3, -0.7, 0.2, -0.5, 0.4, 1.1};
  nrl_params* p = nullptr;
  REQUIRE(nrl_params_create(2, 2, flat, &p) == NRL_OK);
  double l = 0.0;
  REQUIRE(nrl_loss(p, f.data, "tanh", &l) == NRL_OK);
  CHECK(l == doctest::Approx(4.3702710858788185).epsilon(1e-13));
  double g[6];
  REQUIRE(nrl_gradient(p, f.data, "tanh", g, 6) == NRL_OK);
  CHECK(g[0] == doctest::Approx(3.048844731491926).epsilon(1e-12));
  CHECK(g[3] == doctest::Approx(-4.4789917296039246).epsilon(1e-12));
  CHECK(nrl_gradient(p, f.data, "tanh", g, 5) == NRL_ERR_INVALID_INPUT);
  const double x[] = {0.5, 1.0};
  double out = 0.0;
  REQUIRE(nrl_forward(p, "tanh", x, 2, &out) == NRL_OK);
  CHECK(out == doctest::Approx(0.3 * std::tanh(-0.35 + 0.2) - 0.5 * std::tanh(0.2 + 1.1)));
  nrl_params_free(p);
}

TEST_CASE("rescale, train, classify and save") {
  Fixture f;
  nrl_params* p0 = nullptr;
  REQUIRE(nrl_params_init_gaussian(2, 2, 1e-8, 0, &p0) == NRL_OK);
  const double ratios[] = {1.0, 1.0 / 0.95};
  nrl_params* p = nullptr;
  REQUIRE(nrl_rescale_to_ratio(p0, f.data, ratios, 2, &p) == NRL_OK);
  double c[2], c_tilde = 0.0;
  REQUIRE(nrl_neuron_scales(p, f.data, c, 2, &c_tilde) == NRL_OK);
  CHECK(c_tilde == doctest::Approx(0.95).epsilon(1e-12));

  nrl_train_config cfg;
  nrl_train_config_default(&cfg);
  cfg.max_iters = 5000;
  cfg.record_stride = 50;
  nrl_trajectory* tr = nullptr;
  REQUIRE(nrl_train(p, f.data, "tanh", &cfg, &tr) == NRL_OK);
  nrl_trajectory_info info{};
  REQUIRE(nrl_trajectory_info_get(tr, &info) == NRL_OK);
  CHECK(info.terminal_iter == 5000);
  CHECK(info.stop_reason == NRL_STOP_MAX_ITERS);
  CHECK(info.snapshots > 10);
  nrl_params* last = nullptr;
  REQUIRE(nrl_trajectory_state(tr, info.snapshots, &last) == NRL_OK);
  nrl_params* bad = nullptr;
  CHECK(nrl_trajectory_state(tr, info.snapshots + 1, &bad) == NRL_ERR_INVALID_INPUT);

  const auto path = tmp_path("traj.ndjson.gz");
  REQUIRE(nrl_trajectory_save(tr, path.c_str()) == NRL_OK);
  nrl_trajectory* back = nullptr;
  REQUIRE(nrl_trajectory_load(path.c_str(), 2, &back) == NRL_OK);
  nrl_trajectory_info binfo{};
  REQUIRE(nrl_trajectory_info_get(back, &binfo) == NRL_OK);
  CHECK(binfo.snapshots == info.snapshots);
  CHECK(binfo.terminal_loss == info.terminal_loss);
  CHECK(nrl_trajectory_load(tmp_path("nope").c_str(), 2, &back) == NRL_ERR_IO);
  std::filesystem::remove(path);

  nrl_branch_report rep{};
  REQUIRE(nrl_classify(last, f.target, 1.0, &rep) == NRL_OK);
  CHECK(rep.q1_distance < rep.q2_distance);

  nrl_params_free(last);
  nrl_trajectory_free(back);
  nrl_trajectory_free(tr);
  nrl_params_free(p);
  nrl_params_free(p0);
}

TEST_CASE("exact branch members and generalization error") {
  Fixture f;
  const double q1[] = {0.3, 1.0, 1.0, 0.7, 1.0, 1.0};
  nrl_params* p = nullptr;
  REQUIRE(nrl_params_create(2, 2, q1, &p) == NRL_OK);
  nrl_branch_report rep{};
  REQUIRE(nrl_classify(p, f.target, 1e-6, &rep) == NRL_OK);
  CHECK(rep.branch == NRL_BRANCH_Q1);
  CHECK(rep.q1_distance == 0.0);
  double gen = 1.0;
  REQUIRE(nrl_generalization_error(p, f.target, "grid", 1000, -2.0, 2.0, 0, &gen) == NRL_OK);
  CHECK(gen < 1e-30);
  nrl_params_free(p);

  REQUIRE(nrl_params_create(2, 2, nullptr, &p) == NRL_OK);
  REQUIRE(nrl_generalization_error(p, f.target, "grid", 1000, -2.0, 2.0, 0, &gen) == NRL_OK);
  CHECK(gen == doctest::Approx(0.5610622346256153).epsilon(1e-14));
  CHECK(nrl_generalization_error(p, f.target, "sphere", 10, -2.0, 2.0, 0, &gen) == NRL_ERR_INVALID_INPUT);
  nrl_params_free(p);
}

TEST_CASE("rescaling a zero neuron is infeasible") {
  Fixture f;
  const double flat[] = {1e-3, 2e-3, -1e-3, 0.0, 0.0, 0.0};
  nrl_params* p = nullptr;
  REQUIRE(nrl_params_create(2, 2, flat, &p) == NRL_OK);
  const double ratios[] = {1.0, 2.0};
  nrl_params* out = nullptr;
  CHECK(nrl_rescale_to_ratio(p, f.data, ratios, 2, &out) == NRL_ERR_INFEASIBLE_RESCALE);
  nrl_params_free(p);
}

TEST_CASE("verify passes clean and fails with the injected fault") {
  int all = 0, count = 0;
  auto cb = [](const char*, int, double, double, const char*, void* user) { ++*static_cast<int*>(user); };
  REQUIRE(nrl_verify(nullptr, cb, &count, &all) == NRL_OK);
  CHECK(all == 1);
  CHECK(count > 10);
  REQUIRE(nrl_verify("gradient-sign", nullptr, nullptr, &all) == NRL_OK);
  CHECK(all == 0);
  CHECK(nrl_verify("other", nullptr, nullptr, &all) == NRL_ERR_INVALID_INPUT);
}

TEST_CASE("run_config maps failures to status codes") {
  nrl_run_options opts{1, 0, 0};
  CHECK(nrl_run_config(tmp_path("missing.json").c_str(), tmp_path("o").c_str(), &opts, nullptr, nullptr) ==
        NRL_ERR_CONFIG);
  CHECK(std::string(nrl_last_error()).find("missing.json") != std::string::npos);
}
