#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "nire/error.hpp"
#include "nire/grad_check.hpp"
#include "nire/losses.hpp"
#include "nire/metrics.hpp"
#include "nire/ops.hpp"
#include "nire/optim.hpp"
#include "nire/sampler.hpp"
#include "nire/trainer.hpp"

using namespace nire;
namespace fs = std::filesystem;

namespace {

sim::Frame random_frame(int w, int h, std::uint64_t seed, bool binary = false) {
  sim::Frame f(w, h, 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& p : f.pixels) p = binary ? (u(rng) < 0.5 ? 0.0 : 1.0) : u(rng);
  return f;
}

// Direct two-dimensional evaluation with explicit centered moments.
double ssim_oracle(const sim::Frame& a, const sim::Frame& b) {
  const int k = 11, half = 5;
  std::vector<double> w(k * k);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double dy = i - half, dx = j - half;
      w[i * k + j] = std::exp(-(dx * dx + dy * dy) / 4.5);
      total += w[i * k + j];
    }
  }
  for (auto& v : w) v /= total;
  double acc = 0.0;
  int n = 0;
  for (int y = 0; y + k <= a.height; ++y) {
    for (int x = 0; x + k <= a.width; ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          ma += w[i * k + j] * a.at(0, y + i, x + j);
          mb += w[i * k + j] * b.at(0, y + i, x + j);
        }
      double va = 0, vb = 0, cab = 0;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          const double da = a.at(0, y + i, x + j) - ma, db = b.at(0, y + i, x + j) - mb;
          va += w[i * k + j] * da * da;
          vb += w[i * k + j] * db * db;
          cab += w[i * k + j] * da * db;
        }
      const double c1 = 1e-4, c2 = 9e-4;
      acc += (2 * ma * mb + c1) * (2 * cab + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++n;
    }
  }
  return acc / n;
}

TrainConfig small_train_config() {
  TrainConfig c;
  c.model = tiny_config();
  c.data.width = 16;
  c.data.height = 16;
  c.data.scene.min_size = 4;
  c.data.scene.max_size = 7;
  c.data.scene.max_speed = 4;
  c.data.task.exposure_samples = 16;
  c.data.task.unroll_duration_rows = 4;
  c.batch_size = 2;
  c.iterations = 4;
  c.scene_seed = 3;
  c.scene_count = 2;
  return c;
}

std::vector<std::vector<double>> snapshot(const NireModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto& [_, t] : m.params().entries()) out.push_back(t.to_vector());
  return out;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("nire_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("charbonnier loss") {
  std::mt19937_64 rng(1);
  auto x = Tensor::uniform({1, 1, 6, 6}, rng, 0, 1, DType::f64);
  CHECK(charbonnier_loss(x, x).item() == doctest::Approx(1e-3).epsilon(1e-14));
  CHECK(charbonnier_loss(x, x, 0.25).item() == doctest::Approx(0.25).epsilon(1e-14));
  auto y = add_scalar(x, 3.0);
  CHECK(charbonnier_loss(y, x).item() == doctest::Approx(std::sqrt(9.0 + 1e-6)).epsilon(1e-14));
  CHECK(charbonnier_loss(y, x).item() == doctest::Approx(3.000000167).epsilon(1e-9));

  Tensor leaf = x.clone();
  leaf.set_requires_grad(true);
  charbonnier_loss(leaf, x).backward();
  for (double g : leaf.grad().to_vector()) CHECK(g == 0.0);

  auto gt = Tensor::uniform({2, 3, 4}, rng, 0, 1, DType::f64);
  CHECK(grad_check([&](const Tensor& p) { return charbonnier_loss(p, gt); },
                   Tensor::uniform({2, 3, 4}, rng, 0, 1, DType::f64)) < 1e-4);
  CHECK_THROWS_AS(charbonnier_loss(x, Tensor::zeros({1, 1, 6, 5}, DType::f64)), ShapeError);
  CHECK_THROWS_AS(charbonnier_loss(x, x, 0.0), DomainError);
}

TEST_CASE("feature loss") {
  FeatureLoss features(1, DType::f64);
  std::mt19937_64 rng(2);
  auto a = Tensor::uniform({1, 1, 12, 12}, rng, 0, 1, DType::f64);
  auto b = Tensor::uniform({1, 1, 12, 12}, rng, 0, 1, DType::f64);
  CHECK(features(a, a).item() == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(features(a, b).item() > 1e-3);
  CHECK(features(a, b).item() == features(b, a).item());

  // Same seed, same frozen layers; a different seed changes them.
  CHECK(FeatureLoss(1, DType::f64)(a, b).item() == features(a, b).item());
  CHECK(FeatureLoss(1, DType::f64, 8)(a, b).item() != features(a, b).item());
  for (const auto& f : features.features(a)) CHECK(!f.requires_grad());

  for (int trial = 0; trial < 10; ++trial) {
    auto p = Tensor::uniform({1, 1, 8, 8}, rng, 0, 1, DType::f64);
    auto q = Tensor::uniform({1, 1, 8, 8}, rng, 0, 1, DType::f64);
    CHECK(features(p, q).item() >= 0.0);
  }

  const double lambda = 0.1;
  auto terms = reconstruction_loss(a, a, features, lambda);
  CHECK(terms.total.item() == doctest::Approx(1e-3 * (1 + lambda)).epsilon(1e-12));
  CHECK(terms.total.item() >= 0.0);
  auto small_gt = Tensor::uniform({1, 1, 6, 6}, rng, 0, 1, DType::f64);
  CHECK(grad_check([&](const Tensor& p) { return reconstruction_loss(p, small_gt, features, lambda).total; },
                   Tensor::uniform({1, 1, 6, 6}, rng, 0.1, 0.9, DType::f64)) < 1e-4);
}

TEST_CASE("image metrics") {
  auto x = random_frame(24, 20, 3);
  CHECK(psnr(x, x) == kPsnrCap);
  CHECK(ssim(x, x) == 1.0);

  sim::Frame flat(16, 16, 1), shifted(16, 16, 1);
  for (auto& p : flat.pixels) p = 0.4;
  for (auto& p : shifted.pixels) p = 0.5;
  CHECK(mean_squared_error(flat, shifted) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(psnr(flat, shifted) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(psnr_from_mse(1e-11) == kPsnrCap);
  CHECK(psnr_from_mse(1e-4) == doctest::Approx(40.0).epsilon(1e-12));

  for (std::uint64_t seed = 10; seed < 14; ++seed) {
    auto bin = random_frame(19, 17, seed, true);
    auto inv = bin;
    for (auto& p : inv.pixels) p = 1.0 - p;
    const double s = ssim(bin, inv);
    CHECK(s >= -1.0);
    CHECK(s < 0.0);
    CHECK(s == doctest::Approx(ssim_oracle(bin, inv)).epsilon(1e-9));
  }
  auto y = random_frame(24, 20, 4);
  CHECK(ssim(x, y) == doctest::Approx(ssim_oracle(x, y)).epsilon(1e-9));
  CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));

  const auto scores = score_images(x, y);
  CHECK(std::abs(scores.psnr - psnr(x, y)) < 1e-9);
  CHECK(scores.ssim == ssim(x, y));

  CHECK_THROWS_AS(ssim(random_frame(10, 20, 1), random_frame(10, 20, 2)), ShapeError);
  CHECK_THROWS_AS(psnr(random_frame(10, 20, 1), random_frame(20, 10, 2)), ShapeError);
}

TEST_CASE("adam optimizer") {
  ParamSet ps;
  std::mt19937_64 rng(5);
  auto a = ps.add("a", Tensor::randn({3, 4}, rng, 1.0, DType::f64));
  auto b = ps.add("b", Tensor::randn({5}, rng, 1.0, DType::f32));
  const auto a0 = a.to_vector(), b0 = b.to_vector();

  SUBCASE("zero gradient from a fresh state leaves parameters") {
    Adam opt(ps);
    a.mutable_grad<double>();
    b.mutable_grad<float>();
    opt.step();
    CHECK(a.to_vector() == a0);
    CHECK(b.to_vector() == b0);
  }

  SUBCASE("zero learning rate leaves parameters") {
    Adam opt(ps, {.learning_rate = 0.0});
    for (int i = 0; i < 5; ++i) {
      for (auto& g : a.mutable_grad<double>()) g = std::normal_distribution<double>()(rng);
      for (auto& g : b.mutable_grad<float>()) g = static_cast<float>(std::normal_distribution<double>()(rng));
      opt.step();
    }
    CHECK(a.to_vector() == a0);
    CHECK(b.to_vector() == b0);
  }

  SUBCASE("matches a hand-rolled update") {
    Adam opt(ps, {.learning_rate = 0.01, .beta1 = 0.8, .beta2 = 0.9});
    double m = 0, v = 0, p = a0[0];
    for (int t = 1; t <= 4; ++t) {
      const double g = 0.5 * t - 1.0;
      a.zero_grad();
      a.mutable_grad<double>()[0] = g;
      b.zero_grad();
      opt.step();
      m = 0.8 * m + 0.2 * g;
      v = 0.9 * v + 0.1 * g * g;
      p -= 0.01 * (m / (1 - std::pow(0.8, t))) / (std::sqrt(v / (1 - std::pow(0.9, t))) + 1e-8);
      CHECK(a.to_vector()[0] == doctest::Approx(p).epsilon(1e-14));
    }
    CHECK(opt.steps() == 4);
  }

  SUBCASE("first step moves each weight by the learning rate") {
    Adam opt(ps, {.learning_rate = 0.003});
    for (auto& g : a.mutable_grad<double>()) g = std::normal_distribution<double>()(rng);
    opt.step();
    const auto a1 = a.to_vector();
    for (std::size_t i = 0; i < a1.size(); ++i) CHECK(std::abs(a1[i] - a0[i]) == doctest::Approx(0.003).epsilon(1e-6));
  }

  SUBCASE("state round trip") {
    Adam opt(ps);
    for (auto& g : a.mutable_grad<double>()) g = 1.0;
    opt.step();
    Adam other(ps);
    other.load_state(opt.state());
    CHECK(other.steps() == 1);
    opt.step();
    const auto after = a.to_vector();
    for (auto& v : a.mutable_data<double>()) v = 0.0;
    // Same moments and same gradients give the same update from the same start.
    auto saved = opt.state();
    Adam third(ps);
    third.load_state(saved);
    CHECK(third.state().size() == saved.size());
    for (std::size_t i = 0; i < saved.size(); ++i) CHECK(bit_equal(third.state()[i].second, saved[i].second));
    CHECK(after != a0);
  }

  SUBCASE("minimizes a quadratic") {
    Adam opt(ps, {.learning_rate = 0.05});
    for (int it = 0; it < 400; ++it) {
      a.zero_grad();
      b.zero_grad();
      sum(square(a)).backward();
      opt.step();
    }
    for (double v : a.to_vector()) CHECK(std::abs(v) < 0.05);
  }

  CHECK_THROWS_AS(Adam(ps, {.beta1 = 1.0}), ConfigError);
}

TEST_CASE("multi-task sampler") {
  SamplerOptions opts;
  opts.width = 16;
  opts.height = 16;
  opts.task.exposure_samples = 8;

  SUBCASE("single task weights") {
    MultiTaskSampler s({4, 5}, TaskMix::only(sim::TaskKind::deblur), opts);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) CHECK(s.sample(rng).task == sim::TaskKind::deblur);
  }

  SUBCASE("fixed seed gives the same stream") {
    MultiTaskSampler s1({4, 5, 6}, TaskMix{}, opts), s2({4, 5, 6}, TaskMix{}, opts);
    std::mt19937_64 r1(9), r2(9);
    for (int i = 0; i < 12; ++i) {
      const auto x = s1.sample(r1), y = s2.sample(r2);
      CHECK(x.task == y.task);
      CHECK(x.scene_seed == y.scene_seed);
      CHECK(x.target == y.target);
      CHECK(x.inputs == y.inputs);
      CHECK(x.target_shutter == y.target_shutter);
    }
  }

  SUBCASE("frequencies follow the weights") {
    for (const auto& w : {std::array<double, 5>{0.2, 0.2, 0.2, 0.2, 0.2}, std::array<double, 5>{0.5, 0.1, 0.1, 0.1, 0.2},
                          std::array<double, 5>{0.0, 0.3, 0.0, 0.7, 0.0}}) {
      TaskMix mix{w};
      std::mt19937_64 rng(17);
      std::array<int, 5> counts{};
      const int n = 10000;
      for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(mix.draw(rng))];
      for (int t = 0; t < 5; ++t) CHECK(std::abs(counts[t] / double(n) - w[t]) <= 0.02);
      for (int t = 0; t < 5; ++t) {
        if (w[t] == 0.0) CHECK(counts[t] == 0);
      }
    }
  }

  SUBCASE("reconstruction sample targets its own input") {
    MultiTaskSampler s({4}, TaskMix::only(sim::TaskKind::reconstruct), opts);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 4; ++i) {
      auto r = s.sample(rng);
      REQUIRE(r.inputs.size() == 1);
      CHECK(r.target_shutter == r.inputs[0].shutter);
      CHECK(r.target.pixels == r.inputs[0].pixels);
    }
  }

  CHECK_THROWS_AS(MultiTaskSampler({}, TaskMix{}, opts), ContractError);
  CHECK_THROWS_AS(MultiTaskSampler({1}, TaskMix{{0.5, 0.5, 0.5, 0.0, 0.0}}, opts), ConfigError);
  CHECK_THROWS_AS(MultiTaskSampler({1}, TaskMix{{1.5, -0.5, 0.0, 0.0, 0.0}}, opts), ConfigError);
}

TEST_CASE("train config json") {
  auto c = small_train_config();
  c.mix = TaskMix{{0.1, 0.2, 0.3, 0.2, 0.2}};
  c.model.use_events = false;
  c.loss_csv = "loss.csv";
  const auto text = train_config_to_json(c);
  const auto back = parse_train_config(text);
  CHECK(train_config_to_json(back) == text);
  CHECK(back.model == c.model);
  CHECK(back.mix.weights == c.mix.weights);
  CHECK(back.data.task.unroll_duration_rows == c.data.task.unroll_duration_rows);

  const auto partial = parse_train_config(R"({"iterations": 7, "model": {"channels": [8, 16, 32]}})");
  CHECK(partial.iterations == 7);
  CHECK(partial.model.channels == std::vector<int>{8, 16, 32});
  CHECK(partial.batch_size == TrainConfig{}.batch_size);

  CHECK_THROWS_AS(parse_train_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"iteration": 7})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"model": {"bogus": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"batch_size": "four"})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"batch_size": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"task_weights": {"deblur": 0.9}})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"width": 30})"), ConfigError);
  CHECK_THROWS_AS(parse_train_config(R"({"model": {"dtype": "f16"}})"), ConfigError);
}

TEST_CASE("trainer contracts") {
  SUBCASE("zero learning rate keeps weights bit-identical") {
    auto c = small_train_config();
    c.optimizer.learning_rate = 0.0;
    Trainer t(c);
    const auto before = snapshot(t.model());
    t.run();
    CHECK(t.iteration() == 4);
    CHECK(snapshot(t.model()) == before);
  }

  SUBCASE("resume reproduces the next step bit-exactly") {
    auto dir = temp_dir("resume");
    auto c = small_train_config();
    c.iterations = 3;
    c.checkpoint_every = 2;
    c.checkpoint_path = (dir / "ck.nrck").string();
    Trainer straight(c);
    std::vector<StepStats> log;
    for (int i = 0; i < 2; ++i) log.push_back(straight.step());
    straight.save(c.checkpoint_path);
    log.push_back(straight.step());

    Trainer resumed(c);
    resumed.load_state(load_checkpoint(c.checkpoint_path));
    CHECK(resumed.iteration() == 2);
    const auto next = resumed.step();
    CHECK(next.iteration == 3);
    CHECK(next.loss == log[2].loss);
    CHECK(next.tasks == log[2].tasks);
    CHECK(snapshot(resumed.model()) == snapshot(straight.model()));
    CHECK(resumed.optimizer().steps() == 3);
    fs::remove_all(dir);
  }

  SUBCASE("run writes the loss curve and checkpoint") {
    auto dir = temp_dir("run");
    auto c = small_train_config();
    c.iterations = 3;
    c.checkpoint_every = 2;
    c.checkpoint_path = (dir / "ck.nrck").string();
    c.loss_csv = (dir / "loss.csv").string();
    Trainer t(c);
    int calls = 0;
    t.run([&](const StepStats& s) {
      ++calls;
      CHECK(s.loss >= 1e-3 * (1 + c.feature_weight) * 0.999);
      CHECK(s.tasks.size() == 2u);
    });
    CHECK(calls == 3);
    std::ifstream in(c.loss_csv);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 4u);
    CHECK(lines[0] + "\n" == loss_csv_header());
    CHECK(lines[3].rfind("3,", 0) == 0);
    auto state = load_checkpoint(c.checkpoint_path);
    auto model = NireModel::from_state(state);
    CHECK(snapshot(model) == snapshot(t.model()));
    fs::remove_all(dir);
  }

  SUBCASE("non-finite loss aborts with a dump") {
    auto dir = temp_dir("nan");
    auto c = small_train_config();
    c.dump_dir = (dir / "dump").string();
    Trainer t(c);
    Tensor bias = t.model().params().find("decoder.output.bias");
    bias.mutable_data<double>()[0] = std::nan("");
    CHECK_THROWS_AS(t.step(), NumericError);
    CHECK(t.iteration() == 0);
    CHECK(fs::exists(dir / "dump" / "batch.txt"));
    CHECK(fs::exists(dir / "dump" / "sample0_target.pgm"));
    fs::remove_all(dir);
  }

  CHECK_THROWS_AS(
      [] {
        auto c = small_train_config();
        c.data.channels = 3;
        Trainer t(c);
      }(),
      ConfigError);
}

TEST_CASE("single-sample overfit and evaluation") {
  auto c = small_train_config();
  c.mix = TaskMix::only(sim::TaskKind::deblur);
  c.scene_count = 1;
  c.batch_size = 1;
  c.iterations = 2000;
  Trainer t(c);

  EvalOptions eo;
  eo.tasks = {sim::TaskKind::deblur};
  eo.samples = 1;
  eo.scene_seeds = {c.scene_seed};
  eo.data = c.data;
  const auto untrained = evaluate(t.model(), eo);

  double at10 = 0.0, last = 0.0;
  t.run([&](const StepStats& s) {
    if (s.iteration == 10) at10 = s.loss;
    last = s.loss;
  });
  CAPTURE(at10);
  CAPTURE(last);
  CHECK(last * 10.0 <= at10);

  const auto trained = evaluate(t.model(), eo);
  CHECK(untrained[0].psnr < trained[0].psnr);

  {  // evaluation determinism and ground-truth sanity
    EvalOptions held;
    held.tasks = {sim::kAllTasks.begin(), sim::kAllTasks.end()};
    held.samples = 2;
    held.seed = 77;
    held.data = c.data;
    const auto first = eval_table(evaluate(t.model(), held));
    CHECK(first == eval_table(evaluate(t.model(), held)));
    CHECK(eval_csv(evaluate(t.model(), held)).rfind("task,samples,psnr,ssim\n", 0) == 0);

    const auto truth = evaluate_predictor([](const sim::TaskSample& s) { return s.target; }, held);
    REQUIRE(truth.size() == 5u);
    for (const auto& r : truth) {
      CHECK(r.psnr == kPsnrCap);
      CHECK(r.ssim == 1.0);
      CHECK(r.samples == 2);
    }
  }

  {  // checkpoint config mismatch
    auto dir = temp_dir("mismatch");
    const auto path = (dir / "m.nrck").string();
    t.save(path);
    CHECK(load_model(path, c.model).config() == c.model);
    auto other = c.model;
    other.use_feature_enhancement = false;
    CHECK_THROWS_AS(load_model(path, other), ConfigError);
    fs::remove_all(dir);
  }
}
