// pybind11 module: command entry points plus the metric and warp kernels.
#include "tdbgan/commands.hpp"
#include "tdbgan/warp.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace tdbgan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

cli::RunConfig config_from(const std::string& json_text, const std::string& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return cli::run_config_from_json(doc, base_dir);
}

torch::Tensor to_tensor(const Array& a) {
  std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

Array to_array(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  Array out(shape);
  std::memcpy(out.mutable_data(), c.data_ptr<double>(), sizeof(double) * c.numel());
  return out;
}

py::dict report_dict(const eval::VerificationReport& r) {
  py::dict d;
  d["tpr_at_fpr_1pct"] = r.tpr_at_fpr_1pct;
  d["tpr_at_fpr_01pct"] = r.tpr_at_fpr_01pct;
  d["tpr_at_fpr_0pct"] = r.tpr_at_fpr_0pct;
  d["eer"] = r.eer;
  d["ap"] = r.ap;
  d["auc"] = r.auc;
  std::vector<std::pair<double, double>> roc;
  for (const auto& p : r.roc.points) roc.emplace_back(p.fpr, p.tpr);
  d["roc"] = roc;
  return d;
}

}  // namespace

PYBIND11_MODULE(_tdbgan, m) {
  torch::set_num_threads(1);
  m.attr("__version__") = "0.1.0";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_RuntimeError);
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  m.def(
      "resolve_config",
      [](const std::string& json_text, const std::string& base_dir) {
        return cli::to_json(config_from(json_text, base_dir)).dump();
      },
      py::arg("config_json"), py::arg("base_dir"));

  m.def(
      "synth_data",
      [](const std::string& json_text, const std::string& base_dir) {
        auto c = config_from(json_text, base_dir);
        py::gil_scoped_release release;
        cli::cmd_synth(c);
        return c.resolved_data_dir();
      },
      py::arg("config_json"), py::arg("base_dir"));

  m.def(
      "train",
      [](const std::string& json_text, const std::string& base_dir, const std::vector<std::string>& stages,
         bool no_dae, bool no_identity_loss, const std::string& resume, bool quiet) {
        auto c = config_from(json_text, base_dir);
        cli::TrainFlags f;
        if (!stages.empty()) f.stages = stages;
        f.no_dae = no_dae;
        f.no_identity_loss = no_identity_loss;
        f.resume = resume;
        f.quiet = quiet;
        py::gil_scoped_release release;
        cli::cmd_train(c, f);
        return c.resolved_output_dir();
      },
      py::arg("config_json"), py::arg("base_dir"), py::arg("stages"), py::arg("no_dae"),
      py::arg("no_identity_loss"), py::arg("resume"), py::arg("quiet"));

  m.def(
      "edit",
      [](const std::string& checkpoint, const std::vector<std::string>& images,
         const std::vector<std::string>& targets, const std::string& out_dir, bool grid) {
        py::gil_scoped_release release;
        return cli::cmd_edit({checkpoint, images, targets, out_dir, grid});
      },
      py::arg("checkpoint"), py::arg("images"), py::arg("targets"), py::arg("out_dir"), py::arg("grid") = false);

  m.def(
      "eval_verify",
      [](const std::string& json_text, const std::string& base_dir, const std::string& checkpoint,
         const std::string& manifest, const std::string& out_dir) {
        auto c = config_from(json_text, base_dir);
        eval::VerificationReport r;
        {
          py::gil_scoped_release release;
          r = cli::cmd_eval_verify(c, {checkpoint, manifest, out_dir});
        }
        return report_dict(r);
      },
      py::arg("config_json"), py::arg("base_dir"), py::arg("checkpoint"), py::arg("manifest"), py::arg("out_dir"));

  m.def(
      "eval_cls",
      [](const std::string& json_text, const std::string& base_dir, const std::string& checkpoint,
         const std::string& manifest, const std::string& out_dir) {
        auto c = config_from(json_text, base_dir);
        py::gil_scoped_release release;
        return cli::cmd_eval_cls(c, {checkpoint, manifest, out_dir});
      },
      py::arg("config_json"), py::arg("base_dir"), py::arg("checkpoint"), py::arg("manifest"), py::arg("out_dir"));

  m.def(
      "compare_curves",
      [](const std::string& a, const std::string& b, const std::string& term, const std::string& out_csv) {
        auto cmp = cli::cmd_compare_curves(a, b, term, out_csv);
        py::dict d;
        d["term"] = cmp.term;
        d["epoch_means_a"] = cmp.epoch_means_a;
        d["epoch_means_b"] = cmp.epoch_means_b;
        d["final_a"] = cmp.final_a;
        d["final_b"] = cmp.final_b;
        d["gap"] = cmp.gap;
        d["favors"] = cmp.favors;
        return d;
      },
      py::arg("log_a"), py::arg("log_b"), py::arg("term") = std::string(train::terms::kGClsFake),
      py::arg("out_csv") = std::string());

  m.def(
      "verification_metrics",
      [](const std::vector<double>& scores, const std::vector<bool>& is_client) {
        eval::ScoreSet s;
        s.scores = scores;
        for (bool c : is_client) s.labels.push_back(c ? eval::Access::client : eval::Access::impostor);
        return report_dict(eval::verification_metrics(s));
      },
      py::arg("scores"), py::arg("is_client"), "Verification metrics of scores labelled client (True) or impostor.");

  m.def(
      "integrate_deformation", [](const Array& increments) {
        return to_array(warp::integrate_deformation({to_tensor(increments)}).coords);
      },
      py::arg("increments"), "B x 2 x H x W increments to a B x H x W x 2 sampling grid.");

  m.def(
      "warp", [](const Array& image, const Array& grid) { return to_array(warp::warp(to_tensor(image), {to_tensor(grid)})); },
      py::arg("image"), py::arg("grid"), "Bilinear border-clamped sampling of B x C x H x W at grid locations.");
}
