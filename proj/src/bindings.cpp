#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "inper/datagen.hpp"
#include "inper/enin.hpp"
#include "inper/errors.hpp"
#include "inper/experiment.hpp"
#include "inper/hoper.hpp"
#include "inper/nnet.hpp"
#include "inper/tensor.hpp"

namespace py = pybind11;
using namespace inper;

namespace {

Tensor tensor_from(const py::array& arr) {
    auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(arr);
    if (!a) throw ValueError("expected a numeric array");
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = std::size_t(a.shape(i));
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::memcpy(out.mutable_data(), t.data(), t.numel() * sizeof(double));
    return out;
}

}  // namespace

PYBIND11_MODULE(_inper, m) {
    m.doc() = "InPer: entropy-guided intervention training and homeostatic "
              "test-time adaptation";

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    // ---- datagen ----
    py::enum_<datagen::Texture>(m, "Texture")
        .value("FLAT", datagen::Texture::kFlat)
        .value("NOISE", datagen::Texture::kNoise)
        .value("GRADIENT", datagen::Texture::kGradient);

    py::class_<datagen::DomainSpec>(m, "DomainSpec")
        .def(py::init<>())
        .def_readwrite("id", &datagen::DomainSpec::id)
        .def_readwrite("gain", &datagen::DomainSpec::gain)
        .def_readwrite("bias", &datagen::DomainSpec::bias)
        .def_readwrite("texture", &datagen::DomainSpec::texture)
        .def_readwrite("contrast", &datagen::DomainSpec::contrast)
        .def_readwrite("leakage", &datagen::DomainSpec::leakage);

    py::class_<datagen::DomainDataset>(m, "DomainDataset")
        .def_property_readonly("images",
                               [](const datagen::DomainDataset& d) { return array_from(d.images); })
        .def_readonly("labels", &datagen::DomainDataset::labels)
        .def_readonly("domains", &datagen::DomainDataset::domains)
        .def_readonly("manifest_json", &datagen::DomainDataset::manifest_json)
        .def("__len__", &datagen::DomainDataset::size);

    m.def("default_domain_specs", &datagen::default_domain_specs);
    m.def("generate", &datagen::generate, py::arg("specs"), py::arg("classes"),
          py::arg("per_domain"), py::arg("seed"));
    m.def("leave_one_out",
          [](const datagen::DomainDataset& d, std::size_t target) {
              auto split = datagen::leave_one_out(d, target);
              return py::make_tuple(std::move(split.source), std::move(split.target));
          },
          py::arg("data"), py::arg("target_domain"));
    m.def("write_dataset", &datagen::write_dataset, py::arg("dir"), py::arg("data"));
    m.def("read_dataset", &datagen::read_dataset, py::arg("dir"));
    m.def("write_tdf",
          [](const std::string& path, const py::array& a) { datagen::write_tdf(path, tensor_from(a)); },
          py::arg("path"), py::arg("tensor"));
    m.def("read_tdf",
          [](const std::string& path) { return array_from(datagen::read_tdf(path)); },
          py::arg("path"));

    // ---- enin ----
    py::class_<enin::EnInConfig>(m, "EnInConfig")
        .def(py::init<>())
        .def_readwrite("apply_probability", &enin::EnInConfig::apply_probability)
        .def_readwrite("beta_alpha", &enin::EnInConfig::beta_alpha)
        .def_readwrite("eps", &enin::EnInConfig::eps)
        .def_readwrite("insertion_points", &enin::EnInConfig::insertion_points)
        .def_property(
            "patch_ratio",
            [](const enin::EnInConfig& c) { return enin::patch_ratio_name(c.patch_ratio); },
            [](enin::EnInConfig& c, const std::string& s) {
                c.patch_ratio = enin::parse_patch_ratio(s);
            });

    m.def("entropy_mask",
          [](const py::array& features, const py::array& head_w) {
              return array_from(enin::entropy_mask(tensor_from(features), tensor_from(head_w)).map);
          },
          py::arg("final_features"), py::arg("classifier_weights"),
          "Normalized per-location prediction-entropy map, [N,1,h,w] in [0,1].");
    m.def("enin_transform",
          [](const py::array& g, const py::array& features, const py::array& head_w,
             const enin::EnInConfig& cfg, std::uint64_t seed) {
              auto mask = enin::entropy_mask(tensor_from(features), tensor_from(head_w));
              const Tensor gt = tensor_from(g);
              mask = enin::resize_mask(mask, gt.extent(2), gt.extent(3));
              RngStream rng(seed);
              return array_from(enin::enin_transform(gt, mask, cfg, rng));
          },
          py::arg("g"), py::arg("final_features"), py::arg("classifier_weights"),
          py::arg("config"), py::arg("seed"));

    // ---- nnet ----
    py::class_<nnet::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &nnet::TrainConfig::learning_rate)
        .def_readwrite("momentum", &nnet::TrainConfig::momentum)
        .def_readwrite("weight_decay", &nnet::TrainConfig::weight_decay)
        .def_readwrite("steps", &nnet::TrainConfig::steps)
        .def_readwrite("batch_size", &nnet::TrainConfig::batch_size)
        .def_readwrite("seed", &nnet::TrainConfig::seed)
        .def_readwrite("use_enin", &nnet::TrainConfig::use_enin)
        .def_readwrite("enin", &nnet::TrainConfig::enin);

    py::class_<nnet::ConvNet>(m, "ConvNet")
        .def(py::init<std::size_t, std::size_t>(), py::arg("num_classes") = 4,
             py::arg("input_channels") = 3)
        .def_property_readonly("num_classes", &nnet::ConvNet::num_classes)
        .def("init_kaiming",
             [](nnet::ConvNet& model, std::uint64_t seed) {
                 RngStream rng(seed);
                 model.init_kaiming(rng);
             },
             py::arg("seed"))
        .def("forward",
             [](const nnet::ConvNet& model, const py::array& batch) {
                 const auto r = nnet::forward(model, tensor_from(batch), nnet::Mode::kEval);
                 return py::make_tuple(array_from(r.final_features), array_from(r.pooled),
                                       array_from(r.logits));
             },
             py::arg("batch"), "Eval-mode pass; returns (final_features, pooled, logits).")
        .def("save", &nnet::save_model, py::arg("path"));

    m.def("load_model", &nnet::load_model, py::arg("path"));
    m.def("train",
          [](nnet::ConvNet& model, const py::array& images, const std::vector<std::size_t>& labels,
             const nnet::TrainConfig& cfg) {
              return nnet::train(model, tensor_from(images), labels, cfg).losses;
          },
          py::arg("model"), py::arg("images"), py::arg("labels"), py::arg("config"),
          "Minibatch SGD; returns the per-step loss curve.");

    // ---- hoper ----
    py::class_<hoper::HoPerConfig>(m, "HoPerConfig")
        .def(py::init<>())
        .def_readwrite("homeo_threshold", &hoper::HoPerConfig::homeo_threshold)
        .def_readwrite("entropy_threshold", &hoper::HoPerConfig::entropy_threshold)
        .def_readwrite("capacity", &hoper::HoPerConfig::capacity)
        .def_readwrite("eps", &hoper::HoPerConfig::eps)
        .def_property(
            "cp_lambda",
            [](const hoper::HoPerConfig& c) { return hoper::cp_lambda_name(c); },
            [](hoper::HoPerConfig& c, const std::string& s) { hoper::set_cp_lambda(c, s); })
        .def_property(
            "patch_ratio",
            [](const hoper::HoPerConfig& c) { return enin::patch_ratio_name(c.patch_ratio); },
            [](hoper::HoPerConfig& c, const std::string& s) {
                c.patch_ratio = enin::parse_patch_ratio(s);
            });

    py::class_<hoper::MemoryBank>(m, "MemoryBank")
        .def_property_readonly("num_classes", &hoper::MemoryBank::num_classes)
        .def("total_entries", &hoper::MemoryBank::total_entries)
        .def("class_sizes",
             [](const hoper::MemoryBank& b) {
                 std::vector<std::size_t> sizes;
                 for (const auto& c : b.classes) sizes.push_back(c.size());
                 return sizes;
             })
        .def("check_invariants", &hoper::MemoryBank::check_invariants)
        .def("save", &hoper::save_bank, py::arg("path"));

    m.def("load_bank", &hoper::load_bank, py::arg("path"));
    m.def("homeo_score",
          [](const py::array& p, const py::array& q) {
              return hoper::homeo_score(tensor_from(p), tensor_from(q));
          },
          py::arg("p"), py::arg("p_perturbed"));
    m.def("adapt_stream",
          [](const nnet::ConvNet& model, const py::array& inputs, const hoper::HoPerConfig& cfg,
             std::uint64_t seed) {
              RngStream rng(seed);
              auto res = hoper::adapt_stream(model, tensor_from(inputs), cfg, rng);
              py::dict out;
              out["predictions"] = res.predictions;
              std::vector<double> scores;
              std::vector<bool> admitted;
              std::vector<std::size_t> pseudo;
              for (const auto& r : res.records) {
                  scores.push_back(r.score);
                  admitted.push_back(r.admitted);
                  pseudo.push_back(r.pseudo_label);
              }
              out["scores"] = scores;
              out["admitted"] = admitted;
              out["pseudo_labels"] = pseudo;
              out["bank"] = py::cast(std::move(res.bank));
              return out;
          },
          py::arg("model"), py::arg("inputs"), py::arg("config"), py::arg("seed"),
          "Sequential adaptation; class indices in the result are 0-based.");

    // ---- experiment ----
    py::enum_<experiment::Method>(m, "Method")
        .value("BASELINE", experiment::Method::kBaseline)
        .value("ENIN", experiment::Method::kEnin)
        .value("INPER", experiment::Method::kInper)
        .value("INPER_NO_HOMEO", experiment::Method::kInperNoHomeo);

    m.def("run_single",
          [](const datagen::DomainDataset& data, std::size_t target_domain, experiment::Method method,
             const nnet::TrainConfig& train_cfg, const hoper::HoPerConfig& hoper_cfg,
             std::uint64_t seed) {
              const auto r = experiment::run_single(data, target_domain, method, train_cfg,
                                                    hoper_cfg, seed);
              py::dict out;
              out["accuracy"] = r.accuracy;
              out["losses"] = r.losses;
              return out;
          },
          py::arg("data"), py::arg("target_domain"), py::arg("method"), py::arg("train_config"),
          py::arg("hoper_config"), py::arg("seed"),
          "Leave-one-out: train on sources, score the held-out domain.");
}
