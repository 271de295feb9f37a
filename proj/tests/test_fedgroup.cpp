#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "fglab/error.hpp"
#include "fglab/fedgroup.hpp"
#include "support.hpp"

using namespace fglab;

namespace {

ParamVector polar(double degrees) {
  const double r = degrees * std::numbers::pi / 180.0;
  return {std::cos(r), std::sin(r)};
}

GroupState group_with_direction(int id, ParamVector dir) {
  GroupState g;
  g.group_id = id;
  g.params = dir;
  g.cold_direction = std::move(dir);
  return g;
}

RunOptions small_options(const FederatedDataset& data, int rounds, std::uint64_t seed) {
  RunOptions o;
  o.spec = {ModelKind::MCLR, data.input_dim, data.num_classes, 0};
  o.rounds = rounds;
  o.clients_per_round = 6;
  o.train = TrainParams{2, 10, 0.05, 0.0};
  o.seed = seed;
  o.record_trajectory = true;
  return o;
}

}  // namespace

TEST_SUITE("fedgroup") {
  TEST_CASE("client cold start picks the closest founding direction") {
    std::vector<GroupState> groups{group_with_direction(0, polar(30)), group_with_direction(1, polar(60)),
                                   group_with_direction(2, polar(170))};
    const ParamVector update = polar(0);
    const auto a = client_cold_start(update, groups);
    CHECK(a.group_id == 0);
    CHECK(a.dissimilarity == doctest::Approx((1.0 - std::cos(std::numbers::pi / 6.0)) / 2.0).epsilon(1e-12));
    // Equal to a direction: dissimilarity 0.
    const auto b = client_cold_start(polar(60), groups);
    CHECK(b.group_id == 1);
    CHECK(b.dissimilarity == doctest::Approx(0.0));
    // Orthogonal to group 0, parallel to group 1.
    std::vector<GroupState> two{group_with_direction(0, {1, 0}), group_with_direction(1, {0, 1})};
    CHECK(client_cold_start(ParamVector{0, 5}, two).group_id == 1);
    // Ties go to the lowest id.
    std::vector<GroupState> tie{group_with_direction(0, {1, 0}), group_with_direction(1, {1, 0})};
    CHECK(client_cold_start(ParamVector{1, 1}, tie).group_id == 0);
    CHECK_THROWS_AS(client_cold_start(ParamVector{0, 0}, two), ZeroVectorError);
  }

  TEST_CASE("client cold start is invariant to rescaling the update") {
    RngStream r(1, 1);
    std::vector<GroupState> groups;
    for (int g = 0; g < 4; ++g) groups.push_back(group_with_direction(g, testsupport::random_vector(9, r)));
    for (int t = 0; t < 50; ++t) {
      const ParamVector u = testsupport::random_vector(9, r);
      const double s = 0.01 + 100.0 * r.uniform();
      CHECK(client_cold_start(u, groups).group_id == client_cold_start(scaled(u, s), groups).group_id);
    }
  }

  TEST_CASE("inter-group aggregation") {
    const auto out = inter_group_aggregation({{2, 0}, {0, 3}}, 0.1);
    CHECK(out[0][0] == doctest::Approx(2.0));
    CHECK(out[0][1] == doctest::Approx(0.1));
    CHECK(out[1][0] == doctest::Approx(0.1));
    CHECK(out[1][1] == doctest::Approx(3.0));
    const std::vector<ParamVector> in{{1.5, -2.0}, {0.25, 7.0}, {3.0, 3.0}};
    CHECK(inter_group_aggregation(in, 0.0) == in);
    CHECK(inter_group_aggregation({{4, 5}}, 0.3) == std::vector<ParamVector>{{4, 5}});
    CHECK_THROWS_AS(inter_group_aggregation({{0, 0}, {1, 0}}, 0.1), ZeroVectorError);
  }

  TEST_CASE("weighted accuracy and discrepancy") {
    CHECK(weighted_accuracy({{10, 9}, {30, 15}}) == doctest::Approx(0.6));
    CHECK(weighted_accuracy({{7, 3}}) == doctest::Approx(3.0 / 7.0));
    CHECK(weighted_accuracy({{5, 5}, {8, 8}}) == 1.0);
    CHECK_THROWS_AS(weighted_accuracy({{0, 0}}), InvalidArgument);
    CHECK(weighted_discrepancy({1.0, 4.0, 100.0}, {1.0, 3.0, 0.0}) == doctest::Approx(3.25));
  }

  TEST_CASE("intra-group update edge cases") {
    const auto data = testsupport::small_digits(6, 10, 3);
    const ModelSpec spec{ModelKind::MCLR, data.input_dim, data.num_classes, 0};
    GroupState g;
    g.params = initial_model(spec, 5);
    for (double& v : g.params) v += 0.01;
    g.members = {0, 1, 2};
    const TrainParams train{1, 0, 0.1, 0.0};
    CHECK(intra_group_update(g, {}, data, spec, train, 1, 1).params == g.params);
    // Identical shards with one full-batch step equal a centralized gradient step.
    FederatedDataset twin = data;
    twin.shards[1].train = twin.shards[0].train;
    const auto out = intra_group_update(g, {0, 1}, twin, spec, train, 1, 1);
    const ParamVector grad = gradient({spec, g.params}, twin.shards[0].train);
    for (std::size_t i = 0; i < grad.size(); ++i)
      CHECK(out.params[i] == doctest::Approx(g.params[i] - 0.1 * grad[i]).epsilon(1e-12));
    REQUIRE(out.client_models.size() == 2);
  }

  TEST_CASE("single group with no inter-group rate reproduces FedAvg bit for bit") {
    const auto data = testsupport::small_digits(20, 2, 4);
    const RunOptions o = small_options(data, 6, 8);
    GroupingConfig cfg;
    cfg.m = 1;
    cfg.alpha = 5;
    const auto fg = run_fedgroup(data, o, cfg);
    const auto fa = run_fedavg(data, o);
    REQUIRE(fg.result.trajectory.size() == fa.trajectory.size());
    for (std::size_t t = 0; t < fa.trajectory.size(); ++t) CHECK(fg.result.trajectory[t] == fa.trajectory[t]);
    for (std::size_t t = 0; t < fa.metrics.size(); ++t) {
      CHECK(fg.result.metrics[t].weighted_accuracy == fa.metrics[t].weighted_accuracy);
      CHECK(fg.result.metrics[t].discrepancy == fa.metrics[t].discrepancy);
    }
  }

  TEST_CASE("membership is static, disjoint and complete for evaluated clients") {
    const auto data = testsupport::small_digits(30, 2, 5);
    const RunOptions o = small_options(data, 10, 2);
    GroupingConfig cfg;
    cfg.m = 3;
    cfg.alpha = 3;
    const auto run = run_fedgroup(data, o, cfg);
    std::map<int, int> first_group;
    for (const auto& e : run.result.audit) {
      CHECK(first_group.count(e.client_id) == 0);  // one entry per client
      first_group[e.client_id] = e.group_id;
    }
    std::map<int, int> seen;
    for (const auto& g : run.final_groups)
      for (int id : g.members) {
        CHECK(seen.count(id) == 0);
        seen[id] = g.group_id;
        CHECK(first_group.at(id) == g.group_id);
      }
    CHECK(seen.size() == first_group.size());
    // Every client selected at some round is enrolled.
    for (const auto& m : run.result.metrics)
      for (int id : m.selected) CHECK(seen.count(id) == 1);
    // Pre-trained clients enrol at round 0 and the rest later.
    for (const auto& e : run.result.audit) {
      const bool pre = std::binary_search(run.cold_start.pretrained.begin(), run.cold_start.pretrained.end(), e.client_id);
      CHECK((e.assignment_round == 0) == pre);
    }
  }

  TEST_CASE("group cold start recovers planted populations") {
    auto data = testsupport::small_digits(20, 10, 6, 300);
    plant_populations(data, 2);
    const ModelSpec spec{ModelKind::MCLR, data.input_dim, data.num_classes, 0};
    const ParamVector w0 = initial_model(spec, 1);
    for (Measure measure : {Measure::EDC, Measure::MADC}) {
      GroupingConfig cfg;
      cfg.m = 2;
      cfg.alpha = 6;
      cfg.measure = measure;
      const auto cs = group_cold_start(data, spec, w0, cfg, TrainParams{5, 10, 0.05, 0.0}, 3);
      REQUIRE(cs.pretrained.size() == 12);
      std::vector<int> planted;
      for (int id : cs.pretrained) planted.push_back(population_of(id, 2));
      for (std::size_t i = 0; i < planted.size(); ++i)
        for (std::size_t j = 0; j < planted.size(); ++j)
          CHECK((cs.labels[i] == cs.labels[j]) == (planted[i] == planted[j]));
      // Founding parameters are w0 plus the member mean.
      for (const auto& g : cs.groups)
        for (std::size_t p = 0; p < w0.size(); ++p) CHECK(g.params[p] - w0[p] == doctest::Approx(g.cold_direction[p]));
    }
  }

  TEST_CASE("single-group cold start uses the mean of all pre-training updates") {
    const auto data = testsupport::small_digits(10, 3, 7);
    const ModelSpec spec{ModelKind::MCLR, data.input_dim, data.num_classes, 0};
    const ParamVector w0 = initial_model(spec, 1);
    GroupingConfig cfg;
    cfg.m = 1;
    cfg.alpha = 4;
    const auto cs = group_cold_start(data, spec, w0, cfg, TrainParams{1, 10, 0.05, 0.0}, 3);
    REQUIRE(cs.groups.size() == 1);
    for (std::size_t p = 0; p < w0.size(); ++p) {
      double mean = 0.0;
      for (std::size_t i = 0; i < 4; ++i) mean += cs.updates(i, p);
      CHECK(cs.groups[0].cold_direction[p] == doctest::Approx(mean / 4.0).epsilon(1e-12));
    }
    cfg.alpha = 20;
    CHECK_THROWS_AS(group_cold_start(data, spec, w0, cfg, TrainParams{}, 3), InvalidArgument);
  }

  TEST_CASE("random cluster centers give balanced random labels") {
    const auto data = testsupport::small_digits(30, 2, 8);
    const ModelSpec spec{ModelKind::MCLR, data.input_dim, data.num_classes, 0};
    GroupingConfig cfg;
    cfg.m = 3;
    cfg.alpha = 8;
    cfg.ablation = Ablation::RCC;
    const auto a = group_cold_start(data, spec, initial_model(spec, 1), cfg, TrainParams{1, 10, 0.05, 0.0}, 1);
    const auto b = group_cold_start(data, spec, initial_model(spec, 1), cfg, TrainParams{1, 10, 0.05, 0.0}, 2);
    std::vector<int> counts(3, 0);
    for (int l : a.labels) ++counts[static_cast<std::size_t>(l)];
    CHECK(counts == std::vector<int>{8, 8, 8});
    CHECK(a.labels != b.labels);
  }

  TEST_CASE("FeSEM and IFCA assignment match exhaustive scans") {
    RngStream r(9, 9);
    const ModelSpec spec{ModelKind::MCLR, 5, 3, 0};
    for (int t = 0; t < 50; ++t) {
      std::vector<ParamVector> groups;
      for (int g = 0; g < 4; ++g) groups.push_back(testsupport::random_vector(parameter_count(spec), r));
      const ParamVector w = testsupport::random_vector(parameter_count(spec), r);
      int best = 0;
      for (int g = 1; g < 4; ++g)
        if (distance2(w, groups[static_cast<std::size_t>(g)]) < distance2(w, groups[static_cast<std::size_t>(best)])) best = g;
      CHECK(fesem_assign(w, groups) == best);

      ClientShard shard;
      shard.train = testsupport::random_batch(8, 5, 3, r);
      int lbest = 0;
      for (int g = 1; g < 4; ++g)
        if (loss(spec, groups[static_cast<std::size_t>(g)], shard.train) <
            loss(spec, groups[static_cast<std::size_t>(lbest)], shard.train))
          lbest = g;
      CHECK(ifca_assign(shard, spec, groups) == lbest);
    }
    CHECK(fesem_assign({1, 1}, {{0, 0}, {2, 2}}) == 0);
    CHECK(fesem_assign({1, 1}, {{0, 0}, {3, 3}, {1, 1}}) == 2);
    ClientShard s;
    s.train = testsupport::random_batch(4, 5, 3, r);
    CHECK(ifca_assign(s, spec, {ParamVector(18, 0.0), ParamVector(18, 0.0)}) == 0);
  }

  TEST_CASE("reassigning baselines run and are deterministic") {
    const auto data = testsupport::small_digits(12, 2, 10);
    const RunOptions o = small_options(data, 3, 4);
    for (Reassignment rule : {Reassignment::FeSEM, Reassignment::IFCA}) {
      const auto a = run_reassigning_baseline(data, o, 2, rule);
      const auto b = run_reassigning_baseline(data, o, 2, rule);
      REQUIRE(a.metrics.size() == 3);
      for (std::size_t t = 0; t < 3; ++t) CHECK(a.metrics[t].weighted_accuracy == b.metrics[t].weighted_accuracy);
    }
  }

  TEST_CASE("measure and ablation names") {
    CHECK(parse_measure("edc") == Measure::EDC);
    CHECK(parse_measure("madc") == Measure::MADC);
    CHECK(parse_ablation("rac") == Ablation::RAC);
    CHECK(to_string(Ablation::RCC) == "rcc");
    CHECK_THROWS_AS(parse_measure("manhattan"), ConfigError);
  }
}
