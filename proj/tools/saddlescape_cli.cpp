// Command-line driver for the verification suites.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "saddlescape/experiment.hpp"

namespace {

using saddlescape::Errc;
using saddlescape::Error;

std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size() || item[0] == '-') throw Error(Errc::ConfigError, "bad number list: " + text);
    out.push_back(static_cast<std::size_t>(v));
    pos = comma + 1;
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const std::size_t dots = text.find("..");
  if (dots == std::string::npos) throw Error(Errc::ConfigError, "--seeds expects A..B");
  const auto lo = parse_list(text.substr(0, dots));
  const auto hi = parse_list(text.substr(dots + 2));
  if (lo.size() != 1 || hi.size() != 1 || lo[0] > hi[0]) throw Error(Errc::ConfigError, "bad seed range: " + text);
  if (hi[0] - lo[0] >= 1000000) throw Error(Errc::ConfigError, "seed range too long");
  std::vector<std::uint64_t> seeds;
  for (std::size_t s = lo[0]; s <= hi[0]; ++s) seeds.push_back(s);
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Landscape checks for shallow linear networks"};

  std::string dims_text;
  double mu = 1.0;
  std::string mode = "random";
  std::size_t rank = 1;
  double planted_scale = 1.0;
  std::string data_path;
  std::uint64_t seed = 1;
  std::string seeds_text;
  std::vector<std::string> suites;
  std::string out_path;
  double step = 0.0;
  std::size_t iters = saddlescape::OptConfig{}.max_iters;
  double grad_tol = saddlescape::OptConfig{}.grad_tol;
  double noise_std = saddlescape::OptConfig{}.noise_std;
  double perturb_radius = saddlescape::OptConfig{}.perturb_radius;
  std::size_t stall_window = saddlescape::OptConfig{}.stall_window;
  std::string optimizer = "gd";
  double init_scale = 0.1;
  std::size_t rotations = 1;
  std::size_t jobs = 1;

  app.add_option("--dims", dims_text, "D0,D1,D2,N")->required();
  app.add_option("--mu", mu, "regularization weight");
  app.add_option("--mode", mode, "planted | random | file")->check(CLI::IsMember({"planted", "random", "file"}));
  app.add_option("--rank", rank, "planted rank");
  app.add_option("--planted-scale", planted_scale, "standard deviation of the planted factors");
  app.add_option("--data", data_path, "dataset file for --mode file");
  auto* seed_opt = app.add_option("--seed", seed, "dataset seed");
  app.add_option("--seeds", seeds_text, "run seeds A..B (inclusive)");
  app.add_option("--suite", suites, "enumerate | classify | optimize | fdcheck | lift (repeatable)");
  app.add_option("--out", out_path, "write the JSON report here instead of stdout");
  auto* step_opt = app.add_option("--step", step, "fixed step size (default: estimated per run)");
  app.add_option("--iters", iters, "maximum iterations");
  app.add_option("--grad-tol", grad_tol, "gradient-norm stopping threshold");
  app.add_option("--noise-std", noise_std, "noise level for noisy gradient descent");
  app.add_option("--perturb-radius", perturb_radius, "ball radius for perturbed gradient descent");
  app.add_option("--stall-window", stall_window, "perturbations allowed at one stall");
  app.add_option("--optimizer", optimizer, "gd | noisy | perturbed")->check(CLI::IsMember({"gd", "noisy", "perturbed"}));
  app.add_option("--init-scale", init_scale, "standard deviation of the random initialization");
  app.add_option("--rotations", rotations, "random rotations per enumerated critical point");
  app.add_option("--jobs", jobs, "worker threads for seed sweeps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    saddlescape::ExperimentConfig cfg;
    const auto dims = parse_list(dims_text);
    if (dims.size() != 4) throw Error(Errc::ConfigError, "--dims expects D0,D1,D2,N");
    cfg.dims = {dims[0], dims[1], dims[2], dims[3]};
    cfg.mu = mu;
    if (mode == "planted") {
      cfg.data_mode = saddlescape::Planted{rank, planted_scale};
    } else if (mode == "file") {
      if (data_path.empty()) throw Error(Errc::ConfigError, "--mode file needs --data");
      cfg.data_mode = saddlescape::FromFile{data_path};
    } else {
      cfg.data_mode = saddlescape::RandomY{};
    }
    cfg.seeds = seeds_text.empty() ? std::vector<std::uint64_t>{seed} : parse_seed_range(seeds_text);
    cfg.data_seed = seed_opt->count() > 0 ? seed : cfg.seeds.front();
    if (!suites.empty()) {
      cfg.suites.clear();
      for (const auto& s : suites) cfg.suites.push_back(saddlescape::parse_suite(s));
    }
    cfg.auto_step = step_opt->count() == 0;
    if (!cfg.auto_step) cfg.opt.step_size = step;
    cfg.opt.max_iters = iters;
    cfg.opt.grad_tol = grad_tol;
    cfg.opt.noise_std = noise_std;
    cfg.opt.perturb_radius = perturb_radius;
    cfg.opt.stall_window = stall_window;
    cfg.optimizer = saddlescape::parse_optimizer(optimizer);
    cfg.init_scale = init_scale;
    cfg.rotations = rotations;
    cfg.jobs = jobs;
    cfg.tol = saddlescape::Tolerances::from_env();

    const saddlescape::Report report = saddlescape::run(cfg);
    const std::string text = saddlescape::emit_report(report);
    if (out_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(out_path);
      if (!(out << text)) throw Error(Errc::Io, "cannot write " + out_path);
    }
    for (const auto& s : report.suites) {
      std::cerr << s.name << ": " << (s.passed ? "pass" : "FAIL");
      if (!s.message.empty()) std::cerr << " (" << s.message << ")";
      std::cerr << '\n';
    }
    return saddlescape::exit_code(report);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 2;
  }
}
