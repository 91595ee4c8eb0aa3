#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "mec/harness.hpp"

using namespace mec;

namespace {

EnvParams short_env() {
  EnvParams p;
  p.episode_len = 300;
  p.window = 32;
  p.lambda = 10.0;
  return p;
}

void expect_same(const RunRecord& a, const RunRecord& b) {
  EXPECT_EQ(metrics_csv_row(a), metrics_csv_row(b));
}

}  // namespace

TEST(Episode, ConservesTasksOnEveryStep) {
  const EnvParams p = short_env();
  for (double theta : {0.0, 0.5, 1.0}) {
    ThetaPrivatePolicy pol(p, theta);
    Rng rng(3);
    for (int e = 0; e < 5; ++e) {
      const auto res = run_episode(pol, p, rng, true);
      EXPECT_TRUE(res.metrics.conserves_tasks());
      long pending = res.metrics.initial_buffer;
      for (const auto& s : res.log) {
        ASSERT_EQ(s.s.b, pending) << "buffer carried over";
        ASSERT_EQ(s.l + s.a.t + s.a.q, s.s.d + s.s.b);
        pending = s.a.q;
      }
      EXPECT_EQ(pending, res.metrics.final_buffer);
    }
  }
}

TEST(Episode, PerTaskAveragesRecomputeFromLog) {
  const EnvParams p = short_env();
  ThetaPrivatePolicy pol(p, 0.6);
  Rng rng(5);
  const auto res = run_episode(pol, p, rng, true);
  double lat = 0, en = 0, co = 0;
  long done = 0, arrived = 0;
  for (const auto& s : res.log) {
    lat += s.latency;
    en += s.energy;
    co += s.cost;
    done += s.l + s.a.t;
    arrived += s.s.d;
    EXPECT_NEAR(s.reward, p.lambda * s.p_total - s.cost, 1e-12);
  }
  const auto& m = res.metrics;
  EXPECT_EQ(done, m.tasks_completed);
  EXPECT_EQ(arrived, m.tasks_generated);
  EXPECT_NEAR(m.delay_per_task(), lat / done, 1e-12);
  EXPECT_NEAR(m.energy_per_task(), en / done, 1e-12);
  EXPECT_NEAR(m.cost_per_task(), co / done, 1e-12);
  EXPECT_NEAR(m.cost_per_task(), p.weight_wq * m.delay_per_task() + m.energy_per_task(), 1e-12);
}

TEST(Episode, WindowMetricsAverageFullWindows) {
  EnvParams p = short_env();
  p.episode_len = 50;
  p.window = 10;
  ThetaPrivatePolicy pol(p, 1.0);
  Rng rng(8);
  const auto res = run_episode(pol, p, rng, true);
  double sum = 0;
  for (std::size_t k = 9; k < res.log.size(); ++k) sum += res.log[k].h_dt;
  EXPECT_NEAR(res.metrics.h_dt, sum / 41, 1e-12);
}

TEST(Episode, GreedyEnergyPerTaskInRange) {
  EnvParams p;
  p.episode_len = 1200;
  GreedyCostPolicy pol(p);
  const std::vector<std::uint64_t> seeds{1, 2};
  const RunRecord r = evaluate(pol, p, 5, seeds);
  EXPECT_GE(r.energy.mean, 0.5);
  EXPECT_LE(r.energy.mean, 1.0);
}

TEST(Episode, UniformHasMoreEntropyThanGreedy) {
  const EnvParams p = short_env();
  GreedyCostPolicy g(p);
  ThetaPrivatePolicy u = uniform_policy(p);
  Rng a(21), b(21);
  EXPECT_GT(run_episode(u, p, b).metrics.h_dt, run_episode(g, p, a).metrics.h_dt);
}

TEST(Episode, ZeroLengthRejected) {
  EnvParams p;
  p.episode_len = 0;
  GreedyCostPolicy pol(EnvParams{});
  Rng rng(1);
  EXPECT_THROW(run_episode(pol, p, rng), ValidationError);
  EXPECT_THROW(parse_config(R"({"env": {"episode_len": 0}})"), ValidationError);
}

TEST(Evaluate, Deterministic) {
  const EnvParams p = short_env();
  ThetaPrivatePolicy a(p, 0.4), b(p, 0.4);
  const std::vector<std::uint64_t> seeds{4, 9};
  expect_same(evaluate(a, p, 3, seeds), evaluate(b, p, 3, seeds));
}

TEST(Evaluate, GreedyHasLowestCost) {
  const EnvParams p = short_env();
  const std::vector<std::uint64_t> seeds{1};
  GreedyCostPolicy g(p);
  const double greedy = evaluate(g, p, 4, seeds).cost.mean;
  for (double th : {0.2, 0.6, 1.0}) {
    ThetaPrivatePolicy pol(p, th);
    EXPECT_LT(greedy, evaluate(pol, p, 4, seeds).cost.mean);
  }
}

TEST(Evaluate, RejectsEmptyInputs) {
  const EnvParams p = short_env();
  GreedyCostPolicy g(p);
  const std::vector<std::uint64_t> none, one{1};
  EXPECT_THROW(evaluate(g, p, 1, none), ValidationError);
  EXPECT_THROW(evaluate(g, p, 0, one), ValidationError);
}

TEST(Evaluate, StatisticsArePopulation) {
  const Stat s = summarize({1.0, 3.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.std, 1.0);
}

TEST(SweepTheta, ThetaZeroRowIsGreedyRecord) {
  const EnvParams p = short_env();
  const std::vector<std::uint64_t> seeds{7};
  const auto rows = sweep_theta(p, {0.0, 1.0}, 3, seeds);
  GreedyCostPolicy g(p);
  RunRecord greedy = evaluate(g, p, 3, seeds);
  greedy.agent = "theta";
  greedy.theta = 0.0;
  expect_same(rows[0], greedy);
}

// Exact long-run H(D,T) of a theta-private policy, from the stationary law of (d,b,g).
double stationary_h_dt(const EnvParams& p, double theta) {
  const auto states = all_states(p);
  auto index = [&](const State& s) { return (s.d * (p.b_max + 1) + s.b) * 2 + s.g; };
  auto policy = [&](const State& s) {
    std::map<Action, double> pi;
    const auto valid = valid_actions(s, p);
    for (const Action& a : valid) pi[a] += theta / valid.size();
    pi[greedy_cost_action(s, p)] += 1 - theta;
    return pi;
  };
  std::vector<double> mu(states.size(), 1.0 / states.size());
  for (int it = 0; it < 5000; ++it) {
    std::vector<double> next(states.size(), 0.0);
    for (const State& s : states)
      for (const auto& [a, pa] : policy(s))
        for (int g = 0; g <= 1; ++g)
          for (int d = 0; d <= p.d_max; ++d) {
            const double pg = g == s.g ? p.p_channel_stay : 1 - p.p_channel_stay;
            next[index({d, a.q, g})] += mu[index(s)] * pa * pg / (p.d_max + 1);
          }
    mu = next;
  }
  std::map<std::pair<int, int>, double> joint;
  for (const State& s : states)
    for (const auto& [a, pa] : policy(s)) joint[{s.d, a.t}] += mu[index(s)] * pa;
  double h = 0;
  for (const auto& [k, v] : joint)
    if (v > 0) h -= v * std::log2(v);
  return h;
}

TEST(SweepTheta, MeasuredEntropyMatchesStationaryOracle) {
  EnvParams p;
  p.window = 4096;
  p.episode_len = 20000;
  const std::vector<std::uint64_t> seeds{7};
  const auto rows = sweep_theta(p, {0.0, 1.0}, 1, seeds);
  EXPECT_NEAR(rows[0].h_dt.mean, stationary_h_dt(p, 0.0), 0.03);
  EXPECT_NEAR(rows[1].h_dt.mean, stationary_h_dt(p, 1.0), 0.03);
}

TEST(SweepTheta, FullRandomizationRaisesEntropy) {
  const EnvParams p;
  const std::vector<std::uint64_t> seeds{7};
  const auto rows = sweep_theta(p, {0.0, 1.0}, 2, seeds);
  // The exact long-run gap is below one bit here: valid offloads are capped by d+b.
  EXPECT_GT(rows[1].h_dt.mean, rows[0].h_dt.mean + 0.5);
}

TEST(SweepTheta, ParallelMatchesSerial) {
  const EnvParams p = short_env();
  const std::vector<std::uint64_t> seeds{2};
  const std::vector<double> grid{0.0, 0.3, 0.7, 1.0};
  EXPECT_EQ(metrics_csv(sweep_theta(p, grid, 2, seeds, 1)), metrics_csv(sweep_theta(p, grid, 2, seeds, 3)));
}

TEST(ParallelFor, PropagatesFirstError) {
  EXPECT_THROW(parallel_for(6, 3,
                            [](std::size_t i) {
                              if (i == 4) throw std::runtime_error("cell");
                            }),
               std::runtime_error);
}

TEST(SweepLambda, TinyBudgetRuns) {
  RunConfig c = desk_preset();
  c.env.episode_len = 40;
  c.agent.episodes = 2;
  c.agent.hidden_units = 4;
  c.agent.seq_len = 8;
  c.agent.tbptt_len = 4;
  c.agent.batch_size = 4;
  c.eval_episodes = 1;
  const auto a = sweep_lambda(c, {0.0, 5.0}, 2, AgentKind::drqn);
  const auto b = sweep_lambda(c, {0.0, 5.0}, 1, AgentKind::drqn);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].record.lambda, a[i].lambda);
    expect_same(a[i].record, b[i].record);
    EXPECT_EQ(learning_curve_csv(a[i].trained.curve), learning_curve_csv(b[i].trained.curve));
  }
}

TEST(Csv, HeaderAndRowAgree) {
  const EnvParams p = short_env();
  GreedyCostPolicy g(p);
  const std::vector<std::uint64_t> seeds{1};
  const std::string row = metrics_csv_row(evaluate(g, p, 1, seeds));
  const std::string head = metrics_csv_header();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(head.begin(), head.end(), ','));
  EXPECT_EQ(row.rfind("greedy,10,,1,", 0), 0u);
}

TEST(Csv, LearningCurveFormat) {
  const std::vector<CurvePoint> c{{0, -1.5, 1.0}, {1, 2.25, 0.5}};
  EXPECT_EQ(learning_curve_csv(c), "episode,total_reward,epsilon\n0,-1.5,1\n1,2.25,0.5\n");
  EXPECT_EQ(learning_curve_csv(c, 2.0), "lambda,episode,total_reward,epsilon\n2,0,-1.5,1\n2,1,2.25,0.5\n");
}

TEST(Config, RoundTripsThroughJson) {
  RunConfig c = desk_preset();
  c.env.lambda = 16;
  c.agent.loss = LossKind::huber;
  c.seeds = {3, 4};
  c.agent_kind = AgentKind::theta;
  const RunConfig back = parse_config(to_json(c).dump(), paper_preset());
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(Config, PartialOverlayKeepsBase) {
  const RunConfig c = parse_config(R"({"env": {"lambda": 8}, "agent": {"episodes": 12}})", desk_preset());
  EXPECT_DOUBLE_EQ(c.env.lambda, 8.0);
  EXPECT_EQ(c.agent.episodes, 12);
  EXPECT_EQ(c.env.window, 32);
  EXPECT_EQ(c.agent.hidden_units, 32);
}

TEST(Config, RejectsUnknownAndMalformed) {
  EXPECT_THROW(parse_config(R"({"env": {"lamda": 8}})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"network": {}})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"agent": {"loss": "l1"}})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"agent": {"episodes": "many"}})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"env": 3})"), ValidationError);
  EXPECT_THROW(parse_config("{not json"), ValidationError);
  EXPECT_THROW(parse_config(R"({"run": {"seeds": [1, 1]}})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"run": {"theta_grid": [0.5, 1.5]}})"), ValidationError);
}

TEST(Config, PresetsValidate) {
  EXPECT_NO_THROW(paper_preset().validate());
  EXPECT_NO_THROW(desk_preset().validate());
  EXPECT_EQ(paper_preset().env.episode_len, 1200);
  EXPECT_EQ(desk_preset().env.episode_len, 400);
}

TEST(Manifest, RecordsConfigAndVersion) {
  const RunConfig c = desk_preset();
  const auto m = manifest(c, "evaluate");
  EXPECT_EQ(m["artifact_version"], kArtifactVersion);
  EXPECT_EQ(m["command"], "evaluate");
  EXPECT_EQ(m["config"], to_json(c));
  EXPECT_EQ(m["notes"]["per_task_denominator"], kPerTaskNote);
}

TEST(AgentKind, ParsesNames) {
  for (AgentKind k : {AgentKind::dqn, AgentKind::drqn, AgentKind::greedy, AgentKind::theta, AgentKind::uniform})
    EXPECT_EQ(parse_agent_kind(to_string(k)), k);
  EXPECT_THROW(parse_agent_kind("ppo"), ValidationError);
  EXPECT_THROW(make_baseline(AgentKind::dqn, EnvParams{}), ValidationError);
}
