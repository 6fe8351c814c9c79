#include "fsens/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fsens/certify.hpp"
#include "fsens/oracle.hpp"
#include "fsens/sensitivity.hpp"

namespace fsens {

namespace {

using nlohmann::json;

Vector parse_vector(const json& j, const std::string& field) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (j.is_array()) {
    if (!j.empty() && j.front().is_array()) {  // matrix, flattened row-major
      std::vector<double> flat;
      for (const auto& row : j)
        for (const auto& v : row) flat.push_back(v.get<double>());
      return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
  }
  throw std::invalid_argument("config field '" + field + "' must be a number or array");
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

CostFunction cost_registry_lookup(const std::string& name, int state_dim) {
  if (name == "quadratic") {
    CostFunction c;
    c.name = name;
    c.eval = [](const Vector& x) { return x.squaredNorm(); };
    c.grad = [](const Vector& x) { return RowVector(2.0 * x.transpose()); };
    c.hess = [state_dim](const Vector&) {
      return Matrix(2.0 * Matrix::Identity(state_dim, state_dim));
    };
    return c;
  }
  if (name.rfind("coordinate(", 0) == 0 && name.back() == ')') {
    int i = -1;
    try {
      i = std::stoi(name.substr(11, name.size() - 12));
    } catch (...) {
    }
    if (i < 0 || i >= state_dim)
      throw std::invalid_argument("cost '" + name + "': index out of range for dimension " +
                                  std::to_string(state_dim));
    CostFunction c;
    c.name = name;
    c.eval = [i](const Vector& x) { return x(i); };
    c.grad = [i, state_dim](const Vector&) {
      RowVector g = RowVector::Zero(state_dim);
      g(i) = 1.0;
      return g;
    };
    c.hess = [state_dim](const Vector&) { return Matrix(Matrix::Zero(state_dim, state_dim)); };
    return c;
  }
  throw std::invalid_argument("unknown cost '" + name +
                              "'; registered: coordinate(i), quadratic");
}

ModelBundle build_model(const json& cfg) {
  if (!cfg.is_object() || !cfg.contains("type"))
    throw std::invalid_argument("config field 'model' must be an object with a 'type' key");
  std::string type = cfg.at("type").get<std::string>();
  if (type == "ar1") {
    LinearAR1Config c;
    c.a = cfg.value("a", c.a);
    c.eps = cfg.value("eps", c.eps);
    std::string noise = cfg.value("noise", std::string("gaussian"));
    if (noise == "gaussian")
      c.noise = LinearAR1Config::NoiseKind::Gaussian;
    else if (noise == "uniform-symmetric")
      c.noise = LinearAR1Config::NoiseKind::UniformSymmetric;
    else
      throw std::invalid_argument("model.noise must be 'gaussian' or 'uniform-symmetric'");
    return make_ar1(c);
  }
  if (type == "stochastic_nn") {
    int N = cfg.value("N", 3);
    double rho = cfg.value("rho", 0.5);
    StochasticNNConfig c;
    if (cfg.contains("theta")) {
      c = StochasticNNConfig::fully_connected(N, rho, 0.0);
      Vector flat = parse_vector(cfg.at("theta"), "model.theta");
      if (flat.size() != N * N)
        throw std::invalid_argument("model.theta must be N x N");
      for (int i = 0; i < N; ++i)
        for (int k = 0; k < N; ++k) c.theta(i, k) = flat(nn_theta_index(N, i, k));
    } else {
      c = StochasticNNConfig::fully_connected(N, rho, cfg.value("weight", 0.1));
    }
    if (cfg.contains("biases")) c.biases = parse_vector(cfg.at("biases"), "model.biases");
    if (cfg.contains("edges")) {
      c.edges.clear();
      for (const auto& e : cfg.at("edges"))
        c.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }
    return make_stochastic_nn(c);
  }
  if (type == "example2") {
    Example2Config c;
    c.eps = cfg.value("eps", c.eps);
    c.p1 = cfg.value("p1", c.p1);
    c.p2 = cfg.value("p2", c.p2);
    return make_example2(c);
  }
  throw std::invalid_argument("unknown model.type '" + type +
                              "'; known: ar1, stochastic_nn, example2");
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  if (!j.is_object()) throw std::invalid_argument("config root must be an object");
  if (!j.contains("command"))
    throw std::invalid_argument("config field 'command' is required");
  c.command = j.at("command").get<std::string>();
  if (c.command != "certify" && c.command != "estimate" && c.command != "oracle" &&
      c.command != "compare" && c.command != "validate")
    throw std::invalid_argument(
        "config field 'command' must be one of certify, estimate, oracle, compare, validate");
  if (!j.contains("model"))
    throw std::invalid_argument("config field 'model' is required");
  c.model = j.at("model");
  if (j.contains("theta")) {
    c.theta = parse_vector(j.at("theta"), "theta");
    c.theta_given = true;
  }
  c.cost = j.value("cost", c.cost);
  c.n_steps = j.value("n_steps", c.n_steps);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.replicates = j.value("replicates", c.replicates);
  c.seed = j.value("seed", c.seed);
  c.fd_h = j.value("fd_h", c.fd_h);
  if (j.contains("region")) {
    const auto& r = j.at("region");
    c.region.set = true;
    c.region.x_lo = parse_vector(r.at("x_lo"), "region.x_lo");
    c.region.x_hi = parse_vector(r.at("x_hi"), "region.x_hi");
    if (r.contains("theta_lo")) {
      c.region.theta_lo = parse_vector(r.at("theta_lo"), "region.theta_lo");
      c.region.theta_hi = parse_vector(r.at("theta_hi"), "region.theta_hi");
    }
  }
  if (j.contains("mc")) {
    c.n_noise = j.at("mc").value("n_noise", c.n_noise);
    c.n_points = j.at("mc").value("n_points", c.n_points);
  }
  if (j.contains("output")) {
    c.output_path = j.at("output").value("path", c.output_path);
    c.output_format = j.at("output").value("format", c.output_format);
  }

  if (c.n_steps < 1) throw std::invalid_argument("config field 'n_steps' must be >= 1");
  if (c.replicates < 1) throw std::invalid_argument("config field 'replicates' must be >= 1");
  if (c.burn_in >= c.n_steps)
    throw std::invalid_argument("config field 'burn_in' must be < n_steps");
  if (c.fd_h <= 0) throw std::invalid_argument("config field 'fd_h' must be > 0");
  if (c.n_noise < 1 || c.n_points < 1)
    throw std::invalid_argument("config fields 'mc.n_noise' and 'mc.n_points' must be >= 1");
  if (c.output_format != "json" && c.output_format != "csv")
    throw std::invalid_argument("config field 'output.format' must be 'json' or 'csv'");
  return c;
}

json RunConfig::to_json() const {
  json j;
  j["command"] = command;
  j["model"] = model;
  if (theta_given) j["theta"] = vector_to_json(theta);
  j["cost"] = cost;
  j["n_steps"] = n_steps;
  j["burn_in"] = burn_in;
  j["replicates"] = replicates;
  j["seed"] = seed;
  j["fd_h"] = fd_h;
  if (region.set) {
    j["region"] = {{"x_lo", vector_to_json(region.x_lo)},
                   {"x_hi", vector_to_json(region.x_hi)}};
    if (region.theta_lo.size() > 0) {
      j["region"]["theta_lo"] = vector_to_json(region.theta_lo);
      j["region"]["theta_hi"] = vector_to_json(region.theta_hi);
    }
  }
  j["mc"] = {{"n_noise", n_noise}, {"n_points", n_points}};
  if (!output_path.empty() || output_format != "json")
    j["output"] = {{"path", output_path}, {"format", output_format}};
  return j;
}

namespace {

json gradient_to_json(const GradientEstimate& g) {
  json j;
  j["mean"] = vector_to_json(g.mean);
  j["stderr"] = vector_to_json(g.stderr_);
  j["replicates"] = g.replicates;
  j["n_steps"] = g.steps_per_replicate;
  j["burn_in"] = g.burn_in;
  j["cost"] = g.cost_name;
  return j;
}

RegionSampler make_sampler(const RunConfig& cfg, const ModelBundle& bundle,
                           const Vector& theta) {
  RegionSampler s;
  s.count = cfg.n_points;
  s.seed = cfg.seed;
  const auto& dom = bundle.model.state_domain;
  if (cfg.region.set) {
    s.x_lo = cfg.region.x_lo;
    s.x_hi = cfg.region.x_hi;
  } else if (dom.bounded) {
    s.x_lo = dom.lo;
    s.x_hi = dom.hi;
  } else {
    s.x_lo = Vector::Constant(bundle.model.state_dim, -3.0);
    s.x_hi = Vector::Constant(bundle.model.state_dim, 3.0);
  }
  if (cfg.region.set && cfg.region.theta_lo.size() > 0) {
    s.theta_lo = cfg.region.theta_lo;
    s.theta_hi = cfg.region.theta_hi;
  } else {
    s.theta_lo = theta;
    s.theta_hi = theta;
  }
  return s;
}

std::string to_csv(const json& doc) {
  std::ostringstream os;
  // Per-component rows when the result carries component vectors, otherwise
  // key,value rows of the scalar fields.
  const json* grad = doc.contains("forward") ? &doc["forward"]
                     : doc.contains("fd")    ? &doc["fd"]
                                             : nullptr;
  if (doc.contains("result") && doc["result"].contains("mean") &&
      doc["result"]["mean"].is_array())
    grad = &doc["result"];
  if (grad) {
    bool compare = doc.contains("forward") && doc.contains("fd");
    if (compare) {
      os << "component,forward_mean,forward_stderr,fd_mean,fd_stderr,z\n";
      for (std::size_t i = 0; i < doc["forward"]["mean"].size(); ++i)
        os << i << ',' << doc["forward"]["mean"][i].get<double>() << ','
           << doc["forward"]["stderr"][i].get<double>() << ','
           << doc["fd"]["mean"][i].get<double>() << ','
           << doc["fd"]["stderr"][i].get<double>() << ','
           << doc["z_scores"][i].get<double>() << '\n';
    } else {
      os << "component,mean,stderr\n";
      for (std::size_t i = 0; i < (*grad)["mean"].size(); ++i)
        os << i << ',' << (*grad)["mean"][i].get<double>() << ','
           << (*grad)["stderr"][i].get<double>() << '\n';
    }
    return os.str();
  }
  os << "key,value\n";
  if (doc.contains("result"))
    for (auto& [k, v] : doc["result"].items())
      if (v.is_primitive()) os << k << ',' << v.dump() << '\n';
  return os.str();
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  RunResult res;
  json& doc = res.doc;
  doc["schema_version"] = 1;
  doc["version"] = kVersion;
  doc["command"] = cfg.command;
  doc["config"] = cfg.to_json();
  doc["seed"] = cfg.seed;

  auto started = std::chrono::steady_clock::now();
  auto finish = [&](int status) {
    doc["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    res.status = status;
    if (status == kStatusOk && !cfg.output_path.empty()) {
      std::ofstream out(cfg.output_path);
      if (cfg.output_format == "csv")
        out << to_csv(doc);
      else
        out << doc.dump(2) << '\n';
    }
    return res;
  };

  ModelBundle bundle;
  try {
    bundle = build_model(cfg.model);
  } catch (const json::exception& e) {
    doc["error"] = std::string("model config: ") + e.what();
    return finish(kStatusConfigError);
  } catch (const std::invalid_argument& e) {
    doc["error"] = e.what();
    // Shape/typing problems are config errors; violated math preconditions are
    // model errors. The constructors name the condition in the message.
    bool precondition = std::string(e.what()).find("condition") != std::string::npos ||
                        std::string(e.what()).find("precondition") != std::string::npos;
    return finish(precondition ? kStatusModelPrecondition : kStatusConfigError);
  }
  const SystemModel& model = bundle.model;

  Vector theta;
  if (cfg.theta_given) {
    theta = cfg.theta;
  } else if (bundle.default_theta.size() > 0) {
    theta = bundle.default_theta;
  } else {
    doc["error"] = "config field 'theta' is required for this model";
    return finish(kStatusConfigError);
  }
  if (theta.size() != model.param_dim) {
    doc["error"] = "config field 'theta' has dimension " + std::to_string(theta.size()) +
                   ", model expects " + std::to_string(model.param_dim);
    return finish(kStatusConfigError);
  }
  if (!model.theta_admissible(theta)) {
    doc["error"] = "theta outside the parameter region (" + model.param_region_desc + ")";
    return finish(kStatusModelPrecondition);
  }

  CostFunction cost;
  try {
    cost = cost_registry_lookup(cfg.cost, model.state_dim);
  } catch (const std::invalid_argument& e) {
    doc["error"] = e.what();
    return finish(kStatusConfigError);
  }

  long burn_in = cfg.burn_in >= 0 ? cfg.burn_in : default_burn_in(cfg.n_steps);
  if (burn_in >= cfg.n_steps) burn_in = cfg.n_steps / 2;

  try {
    if (cfg.command == "estimate" || cfg.command == "compare") {
      GradientEstimate fwd = batch_gradient(model, theta, cost, cfg.n_steps, burn_in,
                                            cfg.replicates, cfg.seed);
      doc[cfg.command == "compare" ? "forward" : "result"] = gradient_to_json(fwd);
      if (cfg.command == "compare") {
        GradientEstimate fd =
            fd_gradient(model, theta, cost, default_fd_step(theta, cfg.fd_h), cfg.n_steps,
                        burn_in, cfg.replicates, cfg.seed + 1);
        doc["fd"] = gradient_to_json(fd);
        json zs = json::array();
        bool agree = true;
        for (Eigen::Index i = 0; i < fwd.mean.size(); ++i) {
          double combined = std::sqrt(fwd.stderr_(i) * fwd.stderr_(i) +
                                      fd.stderr_(i) * fd.stderr_(i));
          double z = std::abs(fwd.mean(i) - fd.mean(i)) / combined;
          zs.push_back(z);
          if (!(z < 3.0)) agree = false;
        }
        doc["z_scores"] = zs;
        doc["verdict"] = agree ? "agree" : "disagree";
      }
    } else if (cfg.command == "oracle") {
      GradientEstimate fd =
          fd_gradient(model, theta, cost, default_fd_step(theta, cfg.fd_h), cfg.n_steps,
                      burn_in, cfg.replicates, cfg.seed);
      doc["result"] = gradient_to_json(fd);
    } else if (cfg.command == "certify") {
      RegionSampler sampler = make_sampler(cfg, bundle, theta);
      ContractionReport rep =
          certify_contraction(model, bundle.weight, sampler, cfg.n_noise,
                              RngStream(cfg.seed, 42));
      json r;
      r["K_X"] = rep.K_X;
      r["K_Theta"] = rep.K_Theta;
      r["K_X2"] = rep.K_X2;
      r["K_Theta2"] = rep.K_Theta2;
      r["K_XTheta"] = rep.K_XTheta;
      r["stderr_K_X"] = rep.se_X;
      r["stderr_K_Theta"] = rep.se_Theta;
      r["stderr_K_X2"] = rep.se_X2;
      r["stderr_K_Theta2"] = rep.se_Theta2;
      r["stderr_K_XTheta"] = rep.se_XTheta;
      r["lyapunov_beta"] = rep.lyapunov_beta;
      r["lyapunov_K"] = rep.lyapunov_K;
      r["contraction_ok"] = rep.contraction_ok;
      r["n_points"] = rep.n_points;
      r["n_noise"] = rep.n_noise;
      if (rep.has_etas) {
        json etas = json::array();
        for (double e : rep.etas) etas.push_back(e);
        r["etas"] = etas;
      }
      doc["result"] = r;
    } else {  // validate
      RegionSampler sampler = make_sampler(cfg, bundle, theta);
      sampler.count = std::min(cfg.n_points, 16);
      std::vector<Vector> pts;
      for (auto& [x, th] : sampler.points(model.state_domain)) pts.push_back(x);
      ValidationReport rep =
          validate_derivatives(model, theta, pts, RngStream(cfg.seed, 7));
      ValidationReport crep = validate_cost(cost, pts);
      json r;
      r["all_ok"] = rep.all_ok && crep.all_ok;
      json checks = json::array();
      auto add = [&](const ValidationReport& rr) {
        for (const auto& c : rr.checks)
          checks.push_back({{"which", c.which},
                            {"max_rel_error", c.max_rel_error},
                            {"ok", c.ok}});
      };
      add(rep);
      add(crep);
      r["checks"] = checks;
      if (!rep.failure_detail.empty()) r["failure_detail"] = rep.failure_detail;
      doc["result"] = r;
    }
  } catch (const std::invalid_argument& e) {
    doc["error"] = e.what();
    return finish(kStatusModelPrecondition);
  } catch (const std::exception& e) {
    doc["error"] = e.what();
    return finish(kStatusNumericalFailure);
  }

  return finish(kStatusOk);
}

}  // namespace fsens
