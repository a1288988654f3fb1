// Copyright 2026 The effmp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "effmp/errors.hpp"
#include "effmp/losses.hpp"
#include "support/test_helpers.hpp"

using namespace effmp;
using namespace effmp::testing;

namespace
{

Tensor traj_tensor(const std::vector<Point2> & pts, bool requires_grad = false)
{
  std::vector<double> values;
  for (const auto & p : pts) {
    values.push_back(p.x);
    values.push_back(p.y);
  }
  return Tensor::from_values({static_cast<Eigen::Index>(pts.size()), 2}, std::move(values),
                             requires_grad);
}

Mat gt_matrix(const std::vector<Point2> & pts)
{
  Mat m(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = pts[i].x;
    m(static_cast<Eigen::Index>(i), 1) = pts[i].y;
  }
  return m;
}

std::vector<Point2> random_traj(Rng & rng, int n, double scale = 1.0)
{
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) {
    pts.push_back({scale * uniform_in(rng, -1.0, 1.0), scale * uniform_in(rng, -1.0, 1.0)});
  }
  return pts;
}

}  // namespace

TEST_CASE("nll worked examples")
{
  const int n = 5;
  std::vector<Point2> gt;
  for (int i = 0; i < n; ++i) {
    gt.push_back({1.0 * i, 0.5 * i});
  }

  SUBCASE("exact unimodal prediction gives 0")
  {
    const Tensor v = nll({traj_tensor(gt)}, Tensor::vector({1.0}), gt_matrix(gt));
    CHECK(std::abs(v.scalar_value()) < 1e-12);
  }
  SUBCASE("single-step 1 m error gives 0.5")
  {
    auto pred = gt;
    pred[2].x += 1.0;
    const Tensor v = nll({traj_tensor(pred)}, Tensor::vector({1.0}), gt_matrix(gt));
    CHECK(v.scalar_value() == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("two modes, one exact, one hopeless gives log 2")
  {
    auto bad = gt;
    for (auto & p : bad) {
      p.x += 100.0;
    }
    const Tensor v = nll({traj_tensor(gt), traj_tensor(bad)}, Tensor::vector({0.5, 0.5}),
                         gt_matrix(gt));
    CHECK(v.scalar_value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("non-normalized confidences rejected")
  {
    CHECK_THROWS_AS(nll({traj_tensor(gt)}, Tensor::vector({0.6}), gt_matrix(gt)),
                    ValidationError);
  }
}

TEST_CASE("ade and fde basics")
{
  std::vector<Point2> gt;
  for (int i = 0; i < 30; ++i) {
    gt.push_back({0.7 * i, -0.2 * i});
  }
  SUBCASE("exact gives 0")
  {
    CHECK(ade(gt, gt) == doctest::Approx(0.0));
    CHECK(fde(gt, gt) == doctest::Approx(0.0));
  }
  SUBCASE("constant (1,0) offset gives ade 1")
  {
    auto pred = gt;
    for (auto & p : pred) {
      p.x += 1.0;
    }
    CHECK(ade(pred, gt) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("3-4-5 final offset gives fde 5")
  {
    auto pred = gt;
    pred.back().x += 3.0;
    pred.back().y += 4.0;
    CHECK(fde(pred, gt) == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("length mismatch rejected")
  {
    auto pred = gt;
    pred.pop_back();
    CHECK_THROWS_AS(ade(pred, gt), ShapeError);
    CHECK_THROWS_AS(fde(pred, gt), ShapeError);
  }
}

TEST_CASE("min metrics")
{
  Rng rng(71);
  const auto gt = random_traj(rng, 30);
  SUBCASE("k=1 equals the single mode")
  {
    const auto pred = random_traj(rng, 30);
    CHECK(min_ade_k({pred}, gt).first == doctest::Approx(ade(pred, gt)));
    CHECK(min_fde_k({pred}, gt).first == doctest::Approx(fde(pred, gt)));
  }
  SUBCASE("one exact mode among six gives 0")
  {
    std::vector<std::vector<Point2>> preds;
    for (int j = 0; j < 5; ++j) {
      preds.push_back(random_traj(rng, 30));
    }
    preds.insert(preds.begin() + 2, gt);
    CHECK(min_ade_k(preds, gt).first == doctest::Approx(0.0));
    CHECK(min_ade_k(preds, gt).second == 2);
    CHECK(min_fde_k(preds, gt).first == doctest::Approx(0.0));
  }
}

TEST_CASE("oracle equivalence on 1000 random instances")
{
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    CAPTURE(trial);
    const int n = 2 + static_cast<int>(uniform_index(rng, 30));
    const int k = 1 + static_cast<int>(uniform_index(rng, 6));
    const auto gt = random_traj(rng, n);
    std::vector<std::vector<Point2>> preds;
    std::vector<Tensor> pred_tensors;
    for (int j = 0; j < k; ++j) {
      preds.push_back(random_traj(rng, n));
      pred_tensors.push_back(traj_tensor(preds.back()));
    }
    std::vector<double> conf(static_cast<std::size_t>(k));
    double total = 0.0;
    for (auto & c : conf) {
      c = uniform_in(rng, 0.1, 1.0);
      total += c;
    }
    for (auto & c : conf) {
      c /= total;
    }

    CHECK(std::abs(ade(preds[0], gt) - oracle_ade(preds[0], gt)) < 1e-12);
    CHECK(std::abs(fde(preds[0], gt) - oracle_fde(preds[0], gt)) < 1e-12);
    CHECK(std::abs(min_ade_k(preds, gt).first - oracle_min_ade(preds, gt)) < 1e-12);
    CHECK(std::abs(min_fde_k(preds, gt).first - oracle_min_fde(preds, gt)) < 1e-12);
    const double engine_nll =
      nll(pred_tensors, Tensor::vector(conf), gt_matrix(gt)).scalar_value();
    CHECK(std::abs(engine_nll - oracle_nll(preds, conf, gt)) < 1e-12);
  }
}

TEST_CASE("rigid-motion invariance")
{
  Rng rng(88);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 10;
    const auto gt = random_traj(rng, n, 3.0);
    std::vector<std::vector<Point2>> preds{random_traj(rng, n, 3.0), random_traj(rng, n, 3.0)};
    const double angle = uniform_in(rng, -M_PI, M_PI);
    const Point2 shift{uniform_in(rng, -50.0, 50.0), uniform_in(rng, -50.0, 50.0)};

    auto moved = [&](const std::vector<Point2> & pts) {
      std::vector<Point2> out;
      for (const auto & p : pts) {
        out.push_back(rotate(p, angle) + shift);
      }
      return out;
    };
    const auto gt_m = moved(gt);
    std::vector<std::vector<Point2>> preds_m{moved(preds[0]), moved(preds[1])};

    CHECK(std::abs(ade(preds[0], gt) - ade(preds_m[0], gt_m)) < 1e-10);
    CHECK(std::abs(fde(preds[0], gt) - fde(preds_m[0], gt_m)) < 1e-10);
    CHECK(std::abs(min_ade_k(preds, gt).first - min_ade_k(preds_m, gt_m).first) < 1e-10);
    CHECK(std::abs(min_fde_k(preds, gt).first - min_fde_k(preds_m, gt_m).first) < 1e-10);
  }
}

TEST_CASE("mode permutation invariance")
{
  Rng rng(99);
  const int n = 12;
  const auto gt = random_traj(rng, n);
  std::vector<std::vector<Point2>> preds;
  std::vector<double> conf{0.1, 0.4, 0.2, 0.3};
  for (int j = 0; j < 4; ++j) {
    preds.push_back(random_traj(rng, n));
  }
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<std::vector<Point2>> preds_p;
  std::vector<double> conf_p;
  for (const auto j : perm) {
    preds_p.push_back(preds[j]);
    conf_p.push_back(conf[j]);
  }
  std::vector<Tensor> t;
  std::vector<Tensor> t_p;
  for (int j = 0; j < 4; ++j) {
    t.push_back(traj_tensor(preds[static_cast<std::size_t>(j)]));
    t_p.push_back(traj_tensor(preds_p[static_cast<std::size_t>(j)]));
  }
  CHECK(std::abs(nll(t, Tensor::vector(conf), gt_matrix(gt)).scalar_value() -
                 nll(t_p, Tensor::vector(conf_p), gt_matrix(gt)).scalar_value()) < 1e-12);
  CHECK(std::abs(min_ade_k(preds, gt).first - min_ade_k(preds_p, gt).first) < 1e-12);
  CHECK(std::abs(min_fde_k(preds, gt).first - min_fde_k(preds_p, gt).first) < 1e-12);
}

TEST_CASE("nll lower bound when the best mode is exact")
{
  Rng rng(111);
  const auto gt = random_traj(rng, 8);
  for (int trial = 0; trial < 50; ++trial) {
    const double c_exact = uniform_in(rng, 0.05, 0.95);
    std::vector<Tensor> t{traj_tensor(gt), traj_tensor(random_traj(rng, 8))};
    const double v =
      nll(t, Tensor::vector({c_exact, 1.0 - c_exact}), gt_matrix(gt)).scalar_value();
    CHECK(v >= -1e-12);  // mixture mass <= 1 when one mode is exact
    CHECK(v <= -std::log(c_exact) + 1e-12);
  }
}

TEST_CASE("total loss")
{
  std::vector<Point2> gt;
  for (int i = 0; i < 6; ++i) {
    gt.push_back({1.0 * i, 0.0});
  }
  SUBCASE("exact unimodal prediction gives 0")
  {
    const auto parts =
      total_loss({traj_tensor(gt)}, Tensor::vector({1.0}), gt_matrix(gt), {});
    CHECK(std::abs(parts.total.scalar_value()) < 1e-12);
  }
  SUBCASE("weighted sum with defaults")
  {
    auto pred = gt;
    for (auto & p : pred) {
      p.y += 2.0;
    }
    const auto parts = total_loss({traj_tensor(pred)}, Tensor::vector({1.0}), gt_matrix(gt), {});
    const double n_ = parts.nll_term.scalar_value();
    const double a_ = parts.ade_term.scalar_value();
    const double f_ = parts.fde_term.scalar_value();
    CHECK(parts.total.scalar_value() ==
          doctest::Approx(0.75 * n_ + 1.0 * a_ + 0.5 * f_).epsilon(1e-12));
    CHECK(a_ == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f_ == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("winner-take-all picks the FDE-best mode")
  {
    auto near = gt;
    near.back().x += 0.5;
    auto far = gt;
    for (auto & p : far) {
      p.y += 5.0;
    }
    const auto parts = total_loss({traj_tensor(far), traj_tensor(near)},
                                  Tensor::vector({0.5, 0.5}), gt_matrix(gt), {});
    CHECK(parts.best_mode == 1);
    CHECK(parts.fde_term.scalar_value() == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("gradcheck through preds and confidence logits")
  {
    Rng rng(7);
    const auto gtr = random_traj(rng, 6);
    Tensor logits = Tensor::vector({0.3, -0.2, 0.5}, true);
    std::vector<Tensor> preds;
    for (int j = 0; j < 3; ++j) {
      preds.push_back(traj_tensor(random_traj(rng, 6), true));
    }
    std::vector<Tensor> leaves = preds;
    leaves.push_back(logits);
    const auto r = gradcheck(leaves, [&] {
      return total_loss(preds, softmax(logits, 0), gt_matrix(gtr), {}).total;
    });
    CHECK_MESSAGE(r.ok, r.detail);
  }
}

TEST_CASE("metric report line and aggregation")
{
  std::vector<SceneMetrics> per_scene{{1.0, 2.0, 0.5, 1.0}, {3.0, 4.0, 1.5, 2.0}};
  const MetricReport report = aggregate_metrics(per_scene, 6);
  CHECK(report.ade == doctest::Approx(2.0));
  CHECK(report.fde == doctest::Approx(3.0));
  CHECK(report.min_ade == doctest::Approx(1.0));
  CHECK(report.min_fde == doctest::Approx(1.5));
  CHECK(report.eval_line() ==
        "EVAL scenes=2 ade=2.000000 fde=3.000000 minade6=1.000000 minfde6=1.500000");
}

TEST_CASE("min_ade bounded by the top-confidence mode")
{
  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    PredictionSet pred;
    pred.scene_id = "x";
    const auto gt = random_traj(rng, 10);
    const int k = 2 + static_cast<int>(uniform_index(rng, 5));
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
      pred.trajectories.push_back(random_traj(rng, 10));
      pred.confidences.push_back(uniform_in(rng, 0.1, 1.0));
      total += pred.confidences.back();
    }
    for (auto & c : pred.confidences) {
      c /= total;
    }
    const SceneMetrics m = score_prediction(pred, gt);
    CHECK(m.min_ade <= m.ade + 1e-12);
    CHECK(m.min_fde <= m.fde + 1e-12);
  }
}
