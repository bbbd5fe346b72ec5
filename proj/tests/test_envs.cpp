#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "hpl/demonstrator.hpp"
#include "hpl/errors.hpp"
#include "hpl/flappy.hpp"
#include "hpl/rng.hpp"
#include "hpl/tasks.hpp"
#include "hpl/track.hpp"
#include "hpl/tube.hpp"

using namespace hpl;

namespace {

State s3(double a, double b, double c) {
  State x(3);
  x << a, b, c;
  return x;
}

}  // namespace

TEST_CASE("flappy dynamics") {
  auto env = make_flappy(1, 0);
  CHECK(env->step(s3(0, 100, 0), Input::Ones(1)) == s3(4, 100, 15));
  State x = s3(0, 100, 0);
  for (int i = 0; i < 3; ++i) x = env->step(x, Input::Zero(1));
  CHECK(x == s3(12, 97, -3));

  // independent integer update table
  Rng rng(99);
  for (int t = 0; t < 1000000; ++t) {
    const long xi = static_cast<long>(rng() % 100000), yi = static_cast<long>(rng() % 405) - 1;
    const long vi = static_cast<long>(rng() % 61) - 30, ui = static_cast<long>(rng() % 2);
    const State n = env->step(s3(xi, yi, vi), Input::Constant(1, ui));
    const long ex = xi + 4, ey = yi + vi, ev = vi - 1 + (ui ? 16 : 0);
    if (n(0) != ex || n(1) != ey || n(2) != ev) {
      FAIL("flappy update mismatch");
    }
  }
  CHECK(env->input_space().kind == InputKind::Binary);
}

TEST_CASE("flappy constraints, score and visibility") {
  auto env = make_flappy(3, 2);
  const auto& p = env->params();
  CHECK(env->constraints_ok(env->initial_state()));
  CHECK_FALSE(env->constraints_ok(s3(0, -1, 0)));
  CHECK_FALSE(env->constraints_ok(s3(0, p.height + 1, 0)));
  const int px = env->pipe_x(0), lo = env->gap_low(0);
  CHECK(env->constraints_ok(s3(px + 10, lo + 1, 0)));
  CHECK(env->constraints_ok(s3(px + 10, lo + p.gap, 0)));  // closed gap
  CHECK_FALSE(env->constraints_ok(s3(px + 10, lo - 1, 0)));
  CHECK_FALSE(env->constraints_ok(s3(px, lo + p.gap + 1, 0)));
  CHECK(env->constraints_ok(s3(px - 1, lo - 50, 0)));
  CHECK(env->score(s3(px + p.pipe_width, 200, 0)) == 0);
  CHECK(env->score(s3(px + p.pipe_width + 1, 200, 0)) == 1);

  // gap heights stay inside the configured range
  for (int i = 0; i < 500; ++i) {
    CHECK(env->gap_low(i) >= p.gap_lo);
    CHECK(env->gap_low(i) <= p.gap_hi);
  }

  // a view withholds pipes beyond the visibility window
  const State x = s3(0, 200, 0);
  const auto view = std::dynamic_pointer_cast<const FlappyEnv>(env->view_at(x));
  REQUIRE(view);
  CHECK(view->known() == env->known_at(0.0));
  const int k = view->known();
  CHECK(env->pipe_x(k - 1) <= p.visibility);
  CHECK(env->pipe_x(k) > p.visibility);
  const Mat f = view->forecast(x, 60);
  for (int j = 0; j <= 60; ++j) {
    const int i = env->next_pipe(4.0 * j);
    if (i + 1 >= k) CHECK(f(j, 2) == p.fill);
    else CHECK(f(j, 2) == env->gap_center(i + 1));
  }
  // the withheld pipe does not constrain the view
  const State in_wall = s3(env->pipe_x(k) + 1, env->gap_low(k) - 20, 0);
  CHECK_FALSE(env->constraints_ok(in_wall));
  CHECK(view->constraints_ok(in_wall));
}

TEST_CASE("tube dynamics and geometry") {
  auto tube = tube_from_json({{"segments", {{{"slope", 0.5}, {"length", 3.0}}}}, {"id", "flat"}});
  const State x0 = tube->initial_state();
  CHECK(tube->step(x0, Input::Zero(2)) == x0);
  const Mat f = tube->forecast(x0, 10);
  CHECK((f.array() == 0.5).all());
  State x = x0;
  x(2) = tube->center(x(0)) + 0.5 * tube->params().width + 1e-6;
  CHECK_FALSE(tube->constraints_ok(x));
  x(2) = tube->center(x(0)) + 0.5 * tube->params().width;
  CHECK(tube->constraints_ok(x));
  CHECK_THROWS_AS(tube_from_json({{"width", 0.4}}), ParseError);

  // double integrator at dt = 0.1
  State y(4);
  y << 0.5, 1.0, 0.2, -0.5;
  Input u(2);
  u << 2.0, -1.0;
  const State n = tube->step(y, u);
  CHECK(n(0) == doctest::Approx(0.5 + 0.1 * 1.0 + 0.5 * 0.01 * 2.0));
  CHECK(n(1) == doctest::Approx(1.0 + 0.1 * 2.0));
  CHECK(n(2) == doctest::Approx(0.2 - 0.05 - 0.5 * 0.01 * 1.0));
  CHECK(n(3) == doctest::Approx(-0.5 - 0.1));

  // generated tubes follow the generator ranges and are reproducible
  for (int i = 0; i < 20; ++i) {
    auto a = make_tube(4, i), b = make_tube(4, i);
    CHECK(a->describe() == b->describe());
    CHECK(a->segments().size() >= 8);
    CHECK(a->segments().size() <= 15);
    for (const auto& s : a->segments()) {
      CHECK(std::abs(s.slope) <= 1.0);
      CHECK(s.length >= 1.0);
      CHECK(s.length <= 3.0);
    }
  }
  CHECK(make_tube(4, 0)->describe() != make_tube(4, 1)->describe());
}

TEST_CASE("track geometry and shipped layout") {
  auto track = make_env("track", 0, -1);
  const auto* t = dynamic_cast<const TrackEnv*>(track.get());
  REQUIRE(t);
  std::ifstream in(shipped_track_path());
  std::string line;
  std::getline(in, line);
  CHECK(line == "s,kappa");
  std::vector<double> s, k;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string a, b;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    s.push_back(std::stod(a));
    k.push_back(std::stod(b));
  }
  REQUIRE(k.size() > 100);
  const int stride = static_cast<int>(std::lround(t->params().spacing / (s[1] - s[0])));
  const Mat f = track->forecast(track->initial_state(), 15);
  for (int j = 0; j < 16; ++j) CHECK(f(j, 0) == doctest::Approx(k[static_cast<size_t>(j * stride)]).epsilon(1e-12));

  const State x0 = track->initial_state();
  CHECK(track->constraints_ok(x0));
  State x = x0;
  x(3) = 0.41;
  CHECK_FALSE(track->constraints_ok(x));
  x(3) = 0.4;
  CHECK(track->constraints_ok(x));
  x = x0;
  x(0) = 10.5;
  CHECK_FALSE(track->constraints_ok(x));
  x = x0;
  x(1) = 1.1;
  CHECK_FALSE(track->constraints_ok(x));
  Input u(2);
  u << 1.0, 0.5;
  CHECK(track->input_space().contains(u));
  u(1) = 0.51;
  CHECK_FALSE(track->input_space().contains(u));

  // step is a pure function
  u << 0.3, 0.1;
  CHECK(track->step(x0, u) == track->step(x0, u));
  CHECK(make_track(7, 3)->samples() == make_track(7, 3)->samples());
  CHECK(make_track(7, 3)->samples() != make_track(7, 4)->samples());

  // layout csv round trip
  const std::string path = fixtures::temp_dir("track") + "/t.csv";
  save_track_csv(*t, path);
  CHECK(load_track_csv(path, "copy")->samples() == t->samples());
}

TEST_CASE("task generation is seeded") {
  for (const char* fam : {"tube", "track", "flappy"}) {
    const auto a = generate_tasks(fam, 3, 42, 10), b = generate_tasks(fam, 3, 42, 10);
    for (int i = 0; i < 3; ++i) {
      CHECK(a[i]->id() == b[i]->id());
      CHECK(a[i]->describe() == b[i]->describe());
    }
  }
  CHECK_THROWS_AS(make_env("boat", 0, 0), ConfigError);
}

TEST_CASE("demonstrations are feasible and complete") {
  std::vector<EnvPtr> envs = {make_env("tube", 1, 0), make_env("tube", 1, 1), make_env("track", 2, 0),
                              make_env("flappy", 3, 0)};
  for (const auto& env : envs) {
    const DemoResult d = demonstrate(env, 0);
    REQUIRE_MESSAGE(d.execution.has_value(), env->id() << ": " << d.diagnostic);
    const ExecutionCheck c = check_execution(*env, *d.execution);
    CHECK_MESSAGE(c.ok(), env->id());
    CHECK(d.execution->complete);
    for (size_t k = 1; k < d.execution->states.size(); ++k) CHECK(env->constraints_ok(d.execution->states[k]));
  }
}

TEST_CASE("execution csv round trip and checks") {
  auto env = make_env("tube", 1, 0);
  const DemoResult d = demonstrate(env, 0);
  REQUIRE(d.execution);
  const std::string path = fixtures::temp_dir("exec") + "/e.csv";
  write_execution_csv(*d.execution, path);
  const Execution back = read_execution_csv(path);
  CHECK(back.env_id == d.execution->env_id);
  CHECK(back.duration_steps() == d.execution->duration_steps());
  CHECK(check_execution(*env, back).ok());
  Execution bad = back;
  bad.states[5](0) += 0.1;
  const ExecutionCheck c = check_execution(*env, bad);
  CHECK_FALSE(c.dynamics_ok);
  CHECK(c.first_bad_step >= 0);
}
