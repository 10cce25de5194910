// sfd: experiment runner for the spurious-feature diversification lab.
//
// Subcommands:
//   theory    closed-form values (prop1, overlap example, F_p, G, prop4,
//             WSE-vs-OSE condition) as CSV
//   simulate  Monte-Carlo OOD evaluation of the named examples
//   mnist     fetch | build | train | eval | occlude pipeline for
//             MultiColorMNIST / SingleColorMNIST
//   report    render a simulation JSON report as CSV or text

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sfd/experiments.hpp"
#include "sfd/mnist/color.hpp"
#include "sfd/mnist/httplib_transport.hpp"
#include "sfd/mnist/mlp.hpp"
#include "sfd/mnist/mlp_io.hpp"
#include "sfd/report.hpp"
#include "sfd/serialize.hpp"
#include "sfd/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string default_cache_dir() {
  if (const char* env = std::getenv("SFD_CACHE_DIR")) return env;
  if (const char* home = std::getenv("HOME")) return std::string(home) + "/.cache/sfd";
  return ".sfd-cache";
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  fs::create_directories(fs::path(path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(path).parent_path());
  std::ofstream os(path, std::ios::binary);
  os << content;
  if (!os) throw std::runtime_error("cannot write " + path);
}

std::vector<double> parse_list_d(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<int> parse_list_i(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

// ---------------------------------------------------------------------------
// theory

struct TheoryArgs {
  std::string example;
  double p = 0.9;
  int K = 3;
  bool want_fp = false;
  double fp_x = 0.0;
  std::string g_spec;          // "nv,ns,nvo,nso,C"
  bool want_prop4 = false;
  std::string condition_spec;  // "nv,ns,rhov,rhos"
  std::string out;
};

int run_theory(const TheoryArgs& a) {
  std::ostringstream csv;
  csv << "config,method,value,stderr\n";
  csv.precision(12);
  auto row = [&](const std::string& config, const std::string& method, double value,
                 double se) {
    csv << config << ',' << method << ',' << fmt(value) << ',' << fmt(se) << "\n";
  };

  if (!a.example.empty()) {
    const sfd::ModelConfig c = sfd::example_config(a.example, a.p, a.K);
    const std::string base = "example=" + a.example + ";p=" + fmt(a.p);
    if (a.example == "1-1") {
      const auto [ind, ens] = sfd::prop1_values(a.p);
      row(base + ";predictor=model1", "formula", ind, 0);
      row(base + ";predictor=model2", "formula", ind, 0);
      row(base + ";predictor=ose", "formula", ens, 0);
      row(base + ";predictor=wse", "formula", ens, 0);
    } else if (a.example == "1-2") {
      const auto [ose_v, wse_v] = sfd::overlap_example_values(a.p);
      row(base + ";predictor=ose", "formula", ose_v, 0);
      row(base + ";predictor=wse", "formula", wse_v, 0);
    }
    using PK = sfd::PredictorKind;
    const std::pair<const char*, PK> kinds[] = {{"model1", PK::individual1},
                                                {"model2", PK::individual2},
                                                {"ose", PK::ose},
                                                {"wse", PK::wse}};
    for (const auto& [name, kind] : kinds) {
      const sfd::ProbEstimate e = sfd::prop23_values(c, kind);
      row(base + ";predictor=" + name, "fp", e.value, e.stderr_);
    }
    auto g_of = [&](PK kind) {
      switch (kind) {
        case PK::individual1: return sfd::g_exact(c.n_v1, c.n_s1, 0, 0, 0, a.p, c.K);
        case PK::individual2: return sfd::g_exact(c.n_v2, c.n_s2, 0, 0, 0, a.p, c.K);
        case PK::ose:
          return sfd::g_exact(c.n_v1 + c.n_v2, c.n_s1 + c.n_s2, c.n_vo, c.n_so, 2, a.p, c.K);
        case PK::wse:
          return sfd::g_exact(c.n_v1 + c.n_v2, c.n_s1 + c.n_s2, c.n_vo, c.n_so, 4, a.p, c.K);
      }
      return 0.0;
    };
    for (const auto& [name, kind] : kinds)
      row(base + ";predictor=" + name, "g_exact", g_of(kind), 0);
  }

  if (a.want_fp) {
    const sfd::ProbEstimate e = sfd::fp(a.fp_x, a.p, a.K);
    row("x=" + fmt(a.fp_x) + ";p=" + fmt(a.p) + ";k=" + std::to_string(a.K), "fp", e.value,
        e.stderr_);
  }
  if (!a.g_spec.empty()) {
    const std::vector<double> v = parse_list_d(a.g_spec);
    if (v.size() != 5) throw std::invalid_argument("--g expects nv,ns,nvo,nso,C");
    row("g=" + a.g_spec + ";p=" + fmt(a.p) + ";k=" + std::to_string(a.K), "g_exact",
        sfd::g_exact(static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
                     static_cast<int>(v[3]), v[4], a.p, a.K),
        0);
  }
  if (a.want_prop4) {
    const sfd::Prop4Result r = sfd::prop4_imbalanced(a.p);
    row("prop4;p=" + fmt(a.p) + ";regime=balanced", "formula", r.balanced, 0);
    row("prop4;p=" + fmt(a.p) + ";regime=large", "formula", r.large, 0);
    row("prop4;p=" + fmt(a.p) + ";regime=drop", "formula", r.drop, 0);
    row("prop4;p=" + fmt(a.p) + ";regime=bound", "formula", r.bound, 0);
  }
  if (!a.condition_spec.empty()) {
    const std::vector<double> v = parse_list_d(a.condition_spec);
    if (v.size() != 4) throw std::invalid_argument("--condition expects nv,ns,rhov,rhos");
    const sfd::WseOseVerdict verdict = sfd::wse_ose_condition(
        static_cast<int>(v[0]), static_cast<int>(v[1]), v[2], v[3], a.p);
    row("condition=" + a.condition_spec + ";p=" + fmt(a.p), "formula",
        verdict == sfd::WseOseVerdict::wse_wins ? 1.0 : 0.0, 0);
  }

  if (a.out.empty())
    std::cout << csv.str();
  else
    write_text_file(a.out, csv.str());
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string example = "1-1";
  double p = 0.9;
  double sigma = 0.01;
  std::uint64_t n_env = 1000;
  std::string mode = "analytic";
  std::int64_t n_per_env = 2000;
  std::uint64_t seed = 42;
  double lambda = 0.0;  // 0 disables the imbalanced row
  bool groups = false;
  std::string out_dir = "runs";
};

sfd::EvalReport base_report(const SimulateArgs& a, const sfd::ExampleSetup& setup,
                            const sfd::PredictorRef& pred) {
  sfd::EvalReport r;
  r.method = a.mode;
  r.n_env = a.n_env;
  r.n_per_env = a.mode == "sampled" ? a.n_per_env : 0;
  const sfd::EffectiveCoeffs coeffs = sfd::effective_coeffs(setup.spec, pred);
  r.worst_case = sfd::worst_case_accuracy(coeffs, setup.spec);
  r.epsilon_meta =
      a.sigma > 0
          ? sfd::epsilon_bound(a.sigma, setup.spec.n_features(), setup.spec.K)
          : 0.0;
  return r;
}

int run_simulate(const SimulateArgs& a) {
  if (a.mode != "analytic" && a.mode != "sampled")
    throw std::invalid_argument("--mode must be analytic or sampled");
  const sfd::ExampleSetup setup = sfd::make_example(a.example, a.p, a.sigma, a.seed);
  const sfd::EnvironmentLaw law{a.p};
  const sfd::EvalMode mode = a.mode == "analytic" ? sfd::EvalMode::analytic()
                                                  : sfd::EvalMode::sampled(a.n_per_env);
  const sfd::RngStream stream(a.seed, 7);

  std::vector<std::pair<std::string, sfd::EvalReport>> rows;
  std::optional<sfd::EnsembleModel> lambda_model;
  std::vector<std::pair<std::string, sfd::PredictorRef>> preds = {
      {"model1", setup.m1}, {"model2", setup.m2}, {"ose", setup.ose_model},
      {"wse", setup.wse_model}};
  if (a.lambda > 0.0) {
    lambda_model = sfd::wse_imbalanced(setup.m1, setup.m2, a.lambda);
    preds.emplace_back("wse_lambda", *lambda_model);
  }

  std::optional<sfd::JointSimulation> joint;
  if (a.mode == "sampled" && a.groups)
    joint = sfd::simulate_joint(setup, setup.ose_model, law, a.n_env, a.n_per_env, stream);

  for (const auto& [name, pred] : preds) {
    sfd::EvalReport r = base_report(a, setup, pred);
    if (joint && (name == "model1" || name == "model2" || name == "ose")) {
      r.accuracy = name == "model1" ? joint->acc_m1
                   : name == "model2" ? joint->acc_m2
                                      : joint->acc_ens;
      if (name == "ose") r.groups = joint->pooled;
    } else {
      r.accuracy = sfd::ood_accuracy_mc(pred, setup.spec, law, a.n_env, mode, stream);
    }
    if (a.groups) {
      // Confidence/margins on a fresh ID batch (n = 2000).
      const sfd::SampleBatch id_batch = sfd::sample_batch(
          setup.spec, sfd::id_environment(setup.spec), 2000, sfd::RngStream(a.seed, 99));
      r.confidence = sfd::confidence_margin(sfd::predict_logits(pred, id_batch), id_batch.y);
    }
    rows.emplace_back(name, std::move(r));
  }

  ordered_json j;
  j["example"] = a.example;
  j["p"] = a.p;
  j["sigma"] = a.sigma;
  j["seed"] = a.seed;
  j["mode"] = a.mode;
  j["n_env"] = a.n_env;
  j["n_per_env"] = a.mode == "sampled" ? a.n_per_env : 0;
  j["lambda"] = a.lambda;
  ordered_json jr;
  for (const auto& [name, r] : rows) jr[name] = sfd::to_json(r);
  j["reports"] = jr;

  std::ostringstream stem;
  stem << "sim-" << a.example << "-p" << a.p << "-" << a.mode << "-ne" << a.n_env << "-s"
       << a.seed;
  fs::create_directories(a.out_dir);
  const std::string json_path = a.out_dir + "/" + stem.str() + ".json";
  const std::string csv_path = a.out_dir + "/" + stem.str() + ".csv";
  write_text_file(json_path, j.dump(2) + "\n");
  std::ostringstream csv;
  csv << "example,p,predictor," << sfd::eval_report_csv_header() << "\n";
  for (const auto& [name, r] : rows)
    csv << a.example << ',' << fmt(a.p) << ',' << name << ',' << sfd::to_csv_row(r) << "\n";
  write_text_file(csv_path, csv.str());
  std::cout << "wrote " << json_path << "\nwrote " << csv_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// mnist

struct MnistArgs {
  std::string cache_dir = default_cache_dir();
  std::string run_dir = "runs/mnist";
  std::string base_url = "https://ossci-datasets.s3.amazonaws.com/mnist";
  bool offline = false;
  std::string variant = "multi";
  double p_test = 0.7;
  std::string p_grid = "0.7,0.8,0.9";
  std::string seeds = "0,1,2,3,4";
  std::uint64_t seed = 0;
  std::uint64_t data_seed = 12345;
  int steps = 5000;
  double label_smoothing = 0.0;
  std::int64_t occlude_n = 2000;
};

sfd::mnist::ColorVariant variant_of(const std::string& v) {
  if (v == "multi") return sfd::mnist::ColorVariant::multi;
  if (v == "single") return sfd::mnist::ColorVariant::single;
  throw std::invalid_argument("--variant must be multi or single");
}

sfd::mnist::MnistPair load_mnist_cached(const MnistArgs& a) {
  try {
    return sfd::mnist::fetch_mnist(a.base_url, a.cache_dir, /*offline=*/true);
  } catch (const sfd::mnist::OfflineCacheMissError&) {
    throw std::runtime_error(
        "MNIST not cached; run `sfd mnist fetch` first (cache dir: " + a.cache_dir + ")");
  }
}

std::string build_manifest_path(const MnistArgs& a) {
  return a.run_dir + "/build-" + a.variant + ".json";
}
std::string model_path(const MnistArgs& a, std::uint64_t seed, int which) {
  return a.run_dir + "/model-" + a.variant + "-seed" + std::to_string(seed) + "-m" +
         std::to_string(which) + ".sfdm";
}

int run_mnist_fetch(const MnistArgs& a) {
  sfd::mnist::HttplibTransport transport;
  const sfd::mnist::MnistPair pair =
      sfd::mnist::fetch_mnist(a.base_url, a.cache_dir, a.offline, &transport);
  std::cout << "mnist ready: train " << pair.train.n << ", test " << pair.test.n
            << " (cache " << a.cache_dir << ")\n";
  return 0;
}

sfd::mnist::ColorConfig color_config(const MnistArgs& a, double p_test) {
  sfd::mnist::ColorConfig cfg;
  cfg.variant = variant_of(a.variant);
  cfg.p_test = p_test;
  cfg.seed = a.data_seed;
  return cfg;
}

int run_mnist_build(const MnistArgs& a) {
  const std::string manifest = build_manifest_path(a);
  if (fs::exists(manifest)) {
    std::cerr << "cached: " << manifest << "\n";
    return 0;
  }
  const sfd::mnist::MnistPair mnist = load_mnist_cached(a);
  const sfd::mnist::ColorConfig train_cfg = color_config(a, 0.0);
  const sfd::mnist::ColorBatch train =
      sfd::mnist::build_color_dataset(mnist.train, train_cfg, sfd::mnist::Split::train);
  const sfd::mnist::ColorConfig test_cfg = color_config(a, a.p_test);
  const sfd::mnist::ColorBatch test =
      sfd::mnist::build_color_dataset(mnist.test, test_cfg, sfd::mnist::Split::test);

  fs::create_directories(a.run_dir);
  for (int i = 0; i < 2; ++i)
    sfd::mnist::export_ppm_u8(test.image(i), a.run_dir + "/sample-" + a.variant + "-" +
                                                 std::to_string(i) + ".ppm");
  ordered_json j;
  j["variant"] = a.variant;
  j["data_seed"] = a.data_seed;
  j["n_train"] = train.n;
  j["n_test"] = test.n;
  j["p_test_preview"] = a.p_test;
  write_text_file(manifest, j.dump(2) + "\n");
  std::cout << "wrote " << manifest << "\n";
  return 0;
}

int run_mnist_train(const MnistArgs& a) {
  if (!fs::exists(build_manifest_path(a)))
    throw std::runtime_error("missing stage `build`: run `sfd mnist build --variant " +
                             a.variant + "` first");
  const std::string m1_path = model_path(a, a.seed, 1);
  const std::string m2_path = model_path(a, a.seed, 2);
  if (fs::exists(m1_path) && fs::exists(m2_path)) {
    std::cerr << "cached: " << m1_path << ", " << m2_path << "\n";
    return 0;
  }
  const sfd::mnist::MnistPair mnist = load_mnist_cached(a);
  const sfd::mnist::ColorBatch train = sfd::mnist::build_color_dataset(
      mnist.train, color_config(a, 0.0), sfd::mnist::Split::train);
  for (int which = 1; which <= 2; ++which) {
    sfd::mnist::TrainConfig cfg;
    cfg.steps = a.steps;
    cfg.label_smoothing = static_cast<float>(a.label_smoothing);
    cfg.seed = sfd::detail::mix2(a.seed, static_cast<std::uint64_t>(which));
    const sfd::mnist::MlpModel model = sfd::mnist::train_mlp(train, cfg);
    sfd::mnist::save_mlp(model, model_path(a, a.seed, which));
    const double train_acc =
        sfd::mnist::eval_color({&model}, train, sfd::mnist::EvalColorMode::single);
    std::cout << "trained model " << which << " (seed " << a.seed
              << "): train accuracy " << fmt(train_acc) << "\n";
  }
  return 0;
}

int run_mnist_eval(const MnistArgs& a) {
  const std::vector<double> p_grid = parse_list_d(a.p_grid);
  const std::vector<int> seeds = parse_list_i(a.seeds);
  const sfd::mnist::MnistPair mnist = load_mnist_cached(a);

  std::vector<std::vector<sfd::mnist::MlpModel>> models;  // [seed][2]
  for (int s : seeds) {
    const std::string p1 = model_path(a, static_cast<std::uint64_t>(s), 1);
    const std::string p2 = model_path(a, static_cast<std::uint64_t>(s), 2);
    if (!fs::exists(p1) || !fs::exists(p2))
      throw std::runtime_error("missing stage `train` for seed " + std::to_string(s) +
                               ": run `sfd mnist train --variant " + a.variant +
                               " --seed " + std::to_string(s) + "` first");
    models.push_back({sfd::mnist::load_mlp(p1), sfd::mnist::load_mlp(p2)});
  }

  std::ostringstream csv, txt;
  csv << "p,model1_mean,model1_stderr,model2_mean,model2_stderr,ensemble_mean,"
         "ensemble_stderr,n_seeds\n";
  txt << "variant " << a.variant << " (" << seeds.size() << " seeds)\n";
  txt << "      p     model1     model2   ensemble\n";
  for (double p : p_grid) {
    const sfd::mnist::ColorBatch test = sfd::mnist::build_color_dataset(
        mnist.test, color_config(a, p), sfd::mnist::Split::test);
    std::vector<double> acc1, acc2, acce;
    for (const auto& pair : models) {
      acc1.push_back(sfd::mnist::eval_color({&pair[0]}, test, sfd::mnist::EvalColorMode::single));
      acc2.push_back(sfd::mnist::eval_color({&pair[1]}, test, sfd::mnist::EvalColorMode::single));
      acce.push_back(
          sfd::mnist::eval_color({&pair[0], &pair[1]}, test, sfd::mnist::EvalColorMode::ose));
    }
    auto mean_se = [](const std::vector<double>& v) {
      double m = 0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double var = 0;
      for (double x : v) var += (x - m) * (x - m);
      const double se =
          v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1) /
                                   static_cast<double>(v.size()))
                       : 0.0;
      return std::pair<double, double>{m, se};
    };
    const auto [m1, se1] = mean_se(acc1);
    const auto [m2, se2] = mean_se(acc2);
    const auto [me, see] = mean_se(acce);
    csv << fmt(p) << ',' << fmt(m1) << ',' << fmt(se1) << ',' << fmt(m2) << ',' << fmt(se2)
        << ',' << fmt(me) << ',' << fmt(see) << ',' << seeds.size() << "\n";
    char line[128];
    std::snprintf(line, sizeof(line), "  %5.2f   %8.4f   %8.4f   %8.4f\n", p, m1, m2, me);
    txt << line;
  }
  fs::create_directories(a.run_dir);
  const std::string csv_path = a.run_dir + "/eval-" + a.variant + ".csv";
  write_text_file(csv_path, csv.str());
  write_text_file(a.run_dir + "/eval-" + a.variant + ".txt", txt.str());
  std::cout << txt.str() << "wrote " << csv_path << "\n";
  return 0;
}

int run_mnist_occlude(const MnistArgs& a) {
  const std::string p1 = model_path(a, a.seed, 1);
  const std::string p2 = model_path(a, a.seed, 2);
  if (!fs::exists(p1) || !fs::exists(p2))
    throw std::runtime_error("missing stage `train` for seed " + std::to_string(a.seed) +
                             ": run `sfd mnist train` first");
  const sfd::mnist::MnistPair mnist = load_mnist_cached(a);
  sfd::mnist::ColorBatch test = sfd::mnist::build_color_dataset(
      mnist.test, color_config(a, a.p_test), sfd::mnist::Split::test);
  if (a.occlude_n < test.n) {
    test.n = a.occlude_n;
    test.images.resize(static_cast<std::size_t>(test.n) * sfd::mnist::kImageBytes);
    test.labels.resize(static_cast<std::size_t>(test.n));
    test.patch_colors.resize(static_cast<std::size_t>(test.n) * sfd::mnist::kPatches);
    test.stroke_mask.resize(static_cast<std::size_t>(test.n) * 42 * 42);
  }
  for (int which = 1; which <= 2; ++which) {
    const sfd::mnist::MlpModel model =
        sfd::mnist::load_mlp(model_path(a, a.seed, which));
    std::ostringstream csv;
    for (int j = 0; j < sfd::mnist::kPatches; ++j) {
      if (j) csv << ',';
      csv << fmt(sfd::mnist::occlusion_sensitivity(model, test, j));
    }
    csv << "\n";
    const std::string path = a.run_dir + "/occlude-" + a.variant + "-seed" +
                             std::to_string(a.seed) + "-m" + std::to_string(which) + ".csv";
    write_text_file(path, csv.str());
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// report

int run_report(const std::string& in, const std::string& format) {
  std::ifstream is(in);
  if (!is) throw std::runtime_error("cannot open " + in);
  ordered_json j;
  is >> j;
  if (format == "csv") {
    std::cout << "example,p,predictor," << sfd::eval_report_csv_header() << "\n";
    for (const auto& [name, r] : j.at("reports").items()) {
      std::cout << j.at("example").get<std::string>() << ',' << fmt(j.at("p").get<double>())
                << ',' << name << ',' << r.at("method").get<std::string>() << ','
                << fmt(r.at("accuracy").get<double>()) << ','
                << fmt(r.at("accuracy_stderr").get<double>()) << ','
                << r.at("n_env").get<std::uint64_t>() << ','
                << r.at("n_per_env").get<std::int64_t>() << ','
                << fmt(r.at("worst_case").get<double>()) << ','
                << fmt(r.at("epsilon").get<double>()) << ",";
      if (r.contains("groups"))
        std::cout << r["groups"]["fft"].get<std::uint64_t>() << ','
                  << r["groups"]["ttf"].get<std::uint64_t>() << ','
                  << fmt(r["groups"]["fft_ratio"].get<double>()) << ','
                  << fmt(r["groups"]["improve_contri_tt_ff"].get<double>()) << ','
                  << fmt(r["groups"]["improve_contri_tf_ft"].get<double>()) << ','
                  << fmt(r["groups"]["improve_contri_all"].get<double>()) << ',';
      else
        std::cout << ",,,,,,";
      if (r.contains("confidence"))
        std::cout << fmt(r["confidence"]["mean_confidence"].get<double>()) << ','
                  << fmt(r["confidence"]["mean_margin"].get<double>());
      else
        std::cout << ',';
      std::cout << "\n";
    }
  } else {
    std::cout << "example " << j.at("example").get<std::string>() << "  p "
              << j.at("p").get<double>() << "  mode " << j.at("mode").get<std::string>()
              << "  n_env " << j.at("n_env").get<std::uint64_t>() << "\n";
    std::printf("  %-12s %10s %10s %10s\n", "predictor", "accuracy", "stderr", "worst");
    for (const auto& [name, r] : j.at("reports").items())
      std::printf("  %-12s %10.5f %10.5f %10.3f\n", name.c_str(),
                  r.at("accuracy").get<double>(), r.at("accuracy_stderr").get<double>(),
                  r.at("worst_case").get<double>());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spurious-feature diversification lab"};
  app.set_config("--config", "", "TOML/INI config file; flags override file values");
  app.require_subcommand(1);

  TheoryArgs ta;
  CLI::App* theory = app.add_subcommand("theory", "closed-form values as CSV");
  theory->add_option("--example", ta.example, "named example: 1-1, 1-2, 2-1, 2-2");
  theory->add_option("--p", ta.p, "shift probability")->check(CLI::Range(0.0, 1.0));
  theory->add_option("--k", ta.K, "class count");
  theory->add_flag("--fp", ta.want_fp, "evaluate F_p at --x");
  theory->add_option("--x", ta.fp_x, "F_p argument");
  theory->add_option("--g", ta.g_spec, "exact G: nv,ns,nvo,nso,C");
  theory->add_flag("--prop4", ta.want_prop4, "imbalanced-scaling values");
  theory->add_option("--condition", ta.condition_spec, "WSE-vs-OSE: nv,ns,rhov,rhos");
  theory->add_option("--out", ta.out, "CSV output path (default stdout)");

  SimulateArgs sa;
  CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo OOD evaluation");
  simulate->add_option("--example", sa.example, "named example")->required();
  simulate->add_option("--p", sa.p, "shift probability")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--sigma", sa.sigma, "noise std");
  simulate->add_option("--n-env", sa.n_env, "environments");
  simulate->add_option("--mode", sa.mode, "analytic | sampled");
  simulate->add_option("--n-per-env", sa.n_per_env, "samples per environment (sampled)");
  simulate->add_option("--seed", sa.seed, "RNG seed");
  simulate->add_option("--lambda", sa.lambda, "imbalanced WSE scale (0 = off)");
  simulate->add_flag("--groups", sa.groups, "group decomposition + margins");
  simulate->add_option("--out-dir", sa.out_dir, "output directory");

  MnistArgs ma;
  CLI::App* mnist = app.add_subcommand("mnist", "colored-MNIST pipeline");
  mnist->require_subcommand(1);
  mnist->add_option("--cache-dir", ma.cache_dir, "cache root (env SFD_CACHE_DIR)");
  mnist->add_option("--run-dir", ma.run_dir, "artifact directory");
  CLI::App* mfetch = mnist->add_subcommand("fetch", "download/verify MNIST");
  mfetch->add_option("--base-url", ma.base_url, "mirror base URL");
  mfetch->add_flag("--offline", ma.offline, "cache only, no network");
  CLI::App* mbuild = mnist->add_subcommand("build", "build color datasets + samples");
  CLI::App* mtrain = mnist->add_subcommand("train", "train the two MLPs for one seed");
  CLI::App* meval = mnist->add_subcommand("eval", "Table-1-shaped accuracy grid");
  CLI::App* mocc = mnist->add_subcommand("occlude", "per-patch occlusion sensitivity");
  for (CLI::App* sub : {mbuild, mtrain, meval, mocc}) {
    sub->add_option("--variant", ma.variant, "multi | single");
    sub->add_option("--data-seed", ma.data_seed, "dataset seed");
  }
  mbuild->add_option("--p-test", ma.p_test, "preview test corruption");
  mtrain->add_option("--seed", ma.seed, "training seed");
  mtrain->add_option("--steps", ma.steps, "Adam steps");
  mtrain->add_option("--label-smoothing", ma.label_smoothing, "smoothing alpha");
  meval->add_option("--p-grid", ma.p_grid, "comma-separated p values");
  meval->add_option("--seeds", ma.seeds, "comma-separated training seeds");
  mocc->add_option("--seed", ma.seed, "training seed");
  mocc->add_option("--p-test", ma.p_test, "test corruption");
  mocc->add_option("--n", ma.occlude_n, "samples used");

  std::string rep_in, rep_format = "csv";
  CLI::App* report = app.add_subcommand("report", "render a simulation JSON report");
  report->add_option("--in", rep_in, "report JSON")->required();
  report->add_option("--format", rep_format, "csv | text");

  CLI11_PARSE(app, argc, argv);

  try {
    if (theory->parsed()) return run_theory(ta);
    if (simulate->parsed()) return run_simulate(sa);
    if (mnist->parsed()) {
      if (mfetch->parsed()) return run_mnist_fetch(ma);
      if (mbuild->parsed()) return run_mnist_build(ma);
      if (mtrain->parsed()) return run_mnist_train(ma);
      if (meval->parsed()) return run_mnist_eval(ma);
      if (mocc->parsed()) return run_mnist_occlude(ma);
    }
    if (report->parsed()) return run_report(rep_in, rep_format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
