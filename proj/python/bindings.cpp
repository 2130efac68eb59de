#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qsnn/checkpoint.hpp"
#include "qsnn/converter.hpp"
#include "qsnn/error.hpp"
#include "qsnn/experiment.hpp"
#include "qsnn/quant.hpp"
#include "qsnn/selftest.hpp"
#include "qsnn/snn.hpp"
#include "qsnn/trainer.hpp"

namespace py = pybind11;
using namespace qsnn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

std::vector<std::size_t> to_labels(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& a) {
  std::vector<std::size_t> out(static_cast<std::size_t>(a.size()));
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    if (a.data()[i] < 0) throw ConfigError("labels must be non-negative");
    out[i] = static_cast<std::size_t>(a.data()[i]);
  }
  return out;
}

Dataset make_dataset(const Array& x, const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& y) {
  Dataset d{to_tensor(x), to_labels(y), 0};
  for (std::size_t l : d.labels) d.num_classes = std::max(d.num_classes, l + 1);
  d.validate();
  return d;
}

}  // namespace

PYBIND11_MODULE(_qsnn, m) {
  m.doc() = "Quantized-ANN to spiking-network conversion core";
  m.attr("__version__") = kVersion;

  static py::exception<Error> base(m, "QsnnError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ShapeError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      base(e.what());
    }
  });

  m.def("quant_state", &quant::state, py::arg("y"), py::arg("p"));
  m.def("quant_grad_v", &quant::grad_v, py::arg("y"), py::arg("p"));
  m.def("quant_grad_s", &quant::grad_s, py::arg("y"), py::arg("p"));

  py::class_<QuantActLayer>(m, "QuantAct")
      .def(py::init<int, bool, std::optional<double>>(), py::arg("p"), py::arg("noise_adaptor") = false,
           py::arg("scale") = std::nullopt)
      .def_property_readonly("p", &QuantActLayer::p)
      .def_property("scale", &QuantActLayer::scale, &QuantActLayer::set_scale)
      .def("forward", [](QuantActLayer& q, const Array& v) { return to_array(q.quant_forward(to_tensor(v))); })
      .def("na_forward",
           [](QuantActLayer& q, const Array& v, std::uint64_t seed) {
             Rng rng(seed);
             return to_array(q.na_forward(to_tensor(v), rng));
           },
           py::arg("v"), py::arg("seed"))
      .def("expected", [](const QuantActLayer& q, const Array& v) { return to_array(q.expected_activation(to_tensor(v))); });

  py::class_<QuantNet>(m, "QuantNet")
      .def_static("mlp", [](std::vector<std::size_t> widths, int p, bool noise, std::uint64_t seed) {
            return QuantNet::mlp(widths, p, noise, seed);
          },
          py::arg("widths"), py::arg("p"), py::arg("noise_adaptor") = false, py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return load_checkpoint(path).net; })
      .def("save", [](const QuantNet& n, const std::string& path) { save_checkpoint(n, path); })
      .def_property_readonly("input_features", &QuantNet::input_features)
      .def_property_readonly("num_classes", &QuantNet::num_classes)
      .def("forward", [](QuantNet& n, const Array& x) { return to_array(n.forward(to_tensor(x), ForwardMode::deterministic)); })
      .def("train",
           [](QuantNet& n, const Array& x, const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& y,
              std::size_t epochs, std::size_t batch_size, double lr_max, std::uint64_t seed, bool noise) {
             TrainConfig cfg;
             cfg.epochs = epochs;
             cfg.batch_size = batch_size;
             cfg.lr_max = lr_max;
             cfg.seed = seed;
             cfg.noise_adaptor = noise;
             n.set_noise_adaptor(noise);
             py::list out;
             for (const EpochRecord& r : train(n, make_dataset(x, y), cfg))
               out.append(py::dict(py::arg("epoch") = r.epoch, py::arg("train_loss") = r.train_loss,
                                   py::arg("accuracy") = r.eval_accuracy));
             return out;
           },
           py::arg("x"), py::arg("y"), py::arg("epochs") = 10, py::arg("batch_size") = 64, py::arg("lr_max") = 0.1,
           py::arg("seed") = 0, py::arg("noise_adaptor") = false)
      .def("evaluate", [](QuantNet& n, const Array& x,
                          const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& y) {
        return evaluate_ann(n, make_dataset(x, y));
      });

  py::class_<SnnNet>(m, "SnnNet")
      .def_property_readonly("thresholds", [](const SnnNet& s) {
        std::vector<double> th;
        for (const auto& l : s.layers) th.push_back(l.th);
        return th;
      });

  m.def("convert", &convert, py::arg("net"));

  m.def("simulate",
        [](const SnnNet& snn, const Array& x, std::optional<py::array_t<std::int64_t>> y, std::size_t T,
           const std::string& correction, bool instantaneous) {
          SimConfig cfg;
          cfg.T = T;
          cfg.correction = parse_correction(correction);
          cfg.readout = instantaneous ? Readout::instantaneous : Readout::accumulated;
          std::vector<std::size_t> labels;
          if (y) labels = to_labels(*y);
          const SimResult r = simulate(snn, to_tensor(x), labels, cfg);
          return py::dict(py::arg("logits") = to_array(r.logits), py::arg("predictions") = r.predictions,
                          py::arg("accuracy") = r.accuracy, py::arg("spikes_per_sample") = r.spikes_per_sample,
                          py::arg("residuals") = r.residuals);
        },
        py::arg("snn"), py::arg("x"), py::arg("y") = std::nullopt, py::arg("T") = 8, py::arg("correction") = "none",
        py::arg("instantaneous") = false);

  m.def("blobs",
        [](std::size_t n, std::size_t classes, std::size_t dims, double spread, std::uint64_t seed) {
          const Dataset d = gen_synthetic({SyntheticKind::blobs, n, classes, seed, dims, spread});
          std::vector<std::int64_t> y(d.labels.begin(), d.labels.end());
          return py::make_tuple(to_array(d.features), py::array_t<std::int64_t>(y.size(), y.data()));
        },
        py::arg("n"), py::arg("classes"), py::arg("dims"), py::arg("spread") = 0.05, py::arg("seed") = 0);

  m.def("unevenness_demo",
        [](std::vector<double> schedule, double th) {
          const UnevennessReport r = unevenness_demo(schedule, th);
          return py::dict(py::arg("ann_state") = r.ann_state, py::arg("plain") = r.plain.count,
                          py::arg("negative_spikes") = r.negative.count, py::arg("two_stage_offset") = r.two_stage_count,
                          py::arg("text") = r.text);
        },
        py::arg("schedule") = std::vector<double>{2.0, -2.0}, py::arg("th") = 1.0);

  m.def("selftest", [] {
    py::list out;
    for (const SelfCheck& c : run_selftest()) out.append(py::make_tuple(c.name, c.pass, c.detail));
    return out;
  });
}
