#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "svft/errors.hpp"
#include "svft/train.hpp"

namespace svft::train {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string optimizer_name(OptimizerConfig::Kind k) {
  return k == OptimizerConfig::Kind::SGD ? "sgd" : "adam";
}

}  // namespace

std::string report_to_json(const RunReport& r) {
  const auto& o = r.config.optimizer;
  json j = {
      {"method", r.config.method.to_string()},
      {"family", r.config.method.family()},
      {"variant", r.config.method.variant()},
      {"optimizer",
       {{"kind", optimizer_name(o.kind)}, {"lr", o.lr}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps}}},
      {"epochs", r.config.epochs},
      {"batch", r.config.batch},
      {"seed", r.config.seed},
      {"task_seed", r.task_seed},
      {"trainable_params", r.trainable_params},
      {"initial_loss", r.initial_loss},
      {"loss_curve", r.loss_curve},
      {"final_loss", r.final_loss},
      {"reference_loss", r.reference_loss},
      {"recovery", r.recovery},
      {"wall_ms", r.wall_ms},
  };
  return j.dump(2);
}

RunReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunReport r;
    r.config.method = parse_method(j.at("method").get<std::string>());
    const auto& o = j.at("optimizer");
    r.config.optimizer.kind =
        o.at("kind").get<std::string>() == "sgd" ? OptimizerConfig::Kind::SGD : OptimizerConfig::Kind::Adam;
    r.config.optimizer.lr = o.at("lr").get<double>();
    r.config.optimizer.beta1 = o.at("beta1").get<double>();
    r.config.optimizer.beta2 = o.at("beta2").get<double>();
    r.config.optimizer.eps = o.at("eps").get<double>();
    r.config.epochs = j.at("epochs").get<std::size_t>();
    r.config.batch = j.at("batch").get<std::size_t>();
    r.config.seed = j.at("seed").get<std::uint64_t>();
    r.task_seed = j.at("task_seed").get<std::uint64_t>();
    r.trainable_params = j.at("trainable_params").get<std::size_t>();
    r.initial_loss = j.at("initial_loss").get<double>();
    r.loss_curve = j.at("loss_curve").get<std::vector<double>>();
    r.final_loss = j.at("final_loss").get<double>();
    r.reference_loss = j.at("reference_loss").get<double>();
    r.recovery = j.at("recovery").get<double>();
    r.wall_ms = j.at("wall_ms").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("run report: ") + e.what());
  }
}

std::string sweep_csv(const std::vector<RunReport>& reports, bool include_wall_ms) {
  std::ostringstream out;
  out << "method,variant,trainable_params,final_loss,recovery,seed" << (include_wall_ms ? ",wall_ms" : "")
      << '\n';
  for (const auto& r : reports) {
    out << r.config.method.family() << ",\"" << r.config.method.variant() << "\"," << r.trainable_params << ','
        << fmt_double(r.final_loss) << ',' << fmt_double(r.recovery) << ',' << r.task_seed;
    if (include_wall_ms) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", r.wall_ms);
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string frontier_summary(const std::vector<FrontierPoint>& frontier) {
  std::ostringstream out;
  out << "# Pareto frontier (mean held-out loss per variant)\n";
  std::string current;
  for (const auto& p : frontier) {
    if (p.family != current) {
      current = p.family;
      out << "[" << current << "]\n";
    }
    out << "  params=" << p.trainable_params << "  " << p.variant << "  loss=" << fmt_double(p.final_loss)
        << '\n';
  }
  return out.str();
}

std::string quality_csv(const QualityTable& table) {
  std::ostringstream out;
  out << "method,checkpoint,distance,trainable_params,final_loss\n";
  for (const auto& r : table.rows)
    out << r.method << ',' << r.checkpoint << ',' << fmt_double(r.distance) << ',' << r.trainable_params << ','
        << fmt_double(r.final_loss) << '\n';
  out << "\nmethod,worst_loss,best_loss,delta_perf\n";
  for (const auto& d : table.deltas)
    out << d.method << ',' << fmt_double(d.worst_loss) << ',' << fmt_double(d.best_loss) << ','
        << fmt_double(d.delta_perf) << '\n';
  return out.str();
}

}  // namespace svft::train
