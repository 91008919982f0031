// Python bindings for the trajectory-forecasting core: reference MD
// generation, Morse fitting and thresholds, training, guarded rollout and
// metrics, with numpy arrays at the boundary.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "atomcast/checkpoint.hpp"
#include "atomcast/metrics.hpp"
#include "atomcast/rng.hpp"
#include "atomcast/rollout.hpp"
#include "atomcast/simgen.hpp"
#include "atomcast/traj_io.hpp"
#include "atomcast/training.hpp"

namespace py = pybind11;
using namespace atomcast;

namespace {

Trajectory trajectory_from_numpy(const std::vector<std::string>& species,
                                 const py::array_t<double, py::array::c_style | py::array::forcecast>& positions,
                                 double dt_fs, long start_step) {
    if (positions.ndim() != 3 || positions.shape(2) != 3) {
        throw ShapeMismatch("positions must have shape (T, N, 3)");
    }
    const auto t_total = static_cast<std::size_t>(positions.shape(0));
    const auto n = static_cast<std::size_t>(positions.shape(1));
    if (n != species.size()) throw ShapeMismatch("species length must match N");
    auto view = positions.unchecked<3>();
    std::vector<Frame> frames;
    frames.reserve(t_total);
    for (std::size_t t = 0; t < t_total; ++t) {
        Frame f;
        f.step_index = start_step + static_cast<long>(t);
        f.positions.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            f.positions.push_back({view(t, i, 0), view(t, i, 1), view(t, i, 2)});
        }
        frames.push_back(std::move(f));
    }
    return Trajectory(species, std::move(frames), dt_fs);
}

py::array_t<double> positions_to_numpy(const Trajectory& traj) {
    const auto t_total = traj.n_frames();
    const auto n = traj.n_atoms();
    py::array_t<double> out({t_total, n, static_cast<std::size_t>(3)});
    auto view = out.mutable_unchecked<3>();
    for (std::size_t t = 0; t < t_total; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3& p = traj.position(t, i);
            view(t, i, 0) = p.x;
            view(t, i, 1) = p.y;
            view(t, i, 2) = p.z;
        }
    }
    return out;
}

py::array_t<double> displacements_to_numpy(const DisplacementSeries& d) {
    py::array_t<double> out({d.n_steps(), d.n_atoms, static_cast<std::size_t>(3)});
    auto view = out.mutable_unchecked<3>();
    for (std::size_t t = 0; t < d.n_steps(); ++t) {
        for (std::size_t i = 0; i < d.n_atoms; ++i) {
            view(t, i, 0) = d.deltas[t][i].x;
            view(t, i, 1) = d.deltas[t][i].y;
            view(t, i, 2) = d.deltas[t][i].z;
        }
    }
    return out;
}

MorseTable table_from_dict(const py::dict& entries) {
    MorseTable table;
    for (const auto item : entries) {
        const auto key = item.first.cast<std::string>();
        const auto dash = key.find('-');
        if (dash == std::string::npos) {
            throw InvalidConfig("Morse table keys must look like 'A-B', got '" + key + "'");
        }
        table.set(key.substr(0, dash), key.substr(dash + 1), item.second.cast<MorseParams>());
    }
    return table;
}

ThresholdGranularity granularity_from_string(const std::string& name) {
    if (name == "species") return ThresholdGranularity::per_species_pair;
    if (name == "atom") return ThresholdGranularity::per_atom_pair;
    throw InvalidConfig("granularity must be 'species' or 'atom'");
}

// Model + normalizer + window spec bundled for inference from python.
struct PyForecaster {
    Checkpoint ckpt;
};

PyForecaster train_forecaster(const Trajectory& train_traj, const Trajectory& valid_traj,
                              const MorseTable& morse, const ThresholdTable& thresholds,
                              int history, int horizon, int stride, bool normalize,
                              const std::string& backbone, const std::vector<int>& hidden,
                              int blocks, double lambda, int pairs_per_step, int batch_size,
                              double learning_rate, double clip_norm, int max_epochs, int patience,
                              std::uint64_t seed, bool physics_chain) {
    const WindowSpec spec{history, horizon, stride};
    const auto train_windows = make_windows(train_traj, spec);
    const auto valid_windows = make_windows(valid_traj, spec);
    const Normalizer norm = normalize ? Normalizer::fit(train_windows)
                                      : Normalizer::identity(train_traj.n_atoms());

    Architecture arch;
    arch.kind = backbone_from_string(backbone);
    arch.history = history;
    arch.horizon = horizon;
    arch.n_atoms = static_cast<int>(train_traj.n_atoms());
    arch.hidden = hidden;
    arch.blocks = blocks;

    TrainConfig cfg;
    cfg.lambda = lambda;
    cfg.pairs_per_step = pairs_per_step;
    cfg.batch_size = batch_size;
    cfg.learning_rate = learning_rate;
    cfg.clip_norm = clip_norm;
    cfg.max_epochs = max_epochs;
    cfg.patience = patience;
    cfg.seed = seed;
    cfg.physics_chain = physics_chain;

    TrainResult result = train(make_model(arch, seed), train_windows, valid_windows, norm,
                               train_traj.species(), morse, thresholds, cfg);
    PyForecaster f;
    f.ckpt.model = std::move(result.model);
    f.ckpt.normalizer = norm;
    f.ckpt.window = spec;
    f.ckpt.dt_fs = train_traj.dt_fs();
    return f;
}

py::dict rollout_from_python(const PyForecaster& f, const Trajectory& seed_history,
                             const MorseTable& morse, const ThresholdTable& thresholds,
                             int total_steps, bool pii_enabled, int pairs_per_step,
                             std::uint64_t seed, const std::string& freeze_policy) {
    RolloutConfig cfg;
    cfg.total_steps = total_steps;
    cfg.pii_enabled = pii_enabled;
    cfg.pairs_per_step = pairs_per_step;
    cfg.seed = seed;
    cfg.freeze_policy = freeze_policy_from_string(freeze_policy);
    auto [traj, log] = rollout(f.ckpt.model, f.ckpt.normalizer, seed_history, morse, thresholds, cfg);

    py::list violated, frozen;
    for (const auto& s : log.steps) {
        violated.append(s.violated);
        frozen.append(s.frozen);
    }
    py::dict out;
    out["trajectory"] = py::cast(std::move(traj));
    out["frozen_steps"] = log.frozen_steps;
    out["violated"] = violated;
    out["frozen"] = frozen;
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Displacement-based forecasting engine for atomic trajectories";

    py::register_exception<Error>(m, "AtomcastError");

    py::class_<Trajectory>(m, "Trajectory")
        .def(py::init(&trajectory_from_numpy), py::arg("species"), py::arg("positions"),
             py::arg("dt_fs") = 1.0, py::arg("start_step") = 0)
        .def_property_readonly("n_atoms", &Trajectory::n_atoms)
        .def_property_readonly("n_frames", &Trajectory::n_frames)
        .def_property_readonly("dt_fs", &Trajectory::dt_fs)
        .def_property_readonly("species", &Trajectory::species)
        .def("positions", &positions_to_numpy)
        .def("slice", &Trajectory::slice, py::arg("begin"), py::arg("end"))
        .def("__len__", &Trajectory::n_frames)
        .def("__repr__", [](const Trajectory& t) {
            return "Trajectory(" + std::to_string(t.n_frames()) + " frames, " +
                   std::to_string(t.n_atoms()) + " atoms)";
        });

    m.def("read_trajectory", [](const std::string& path) { return read_trajectory(path); },
          py::arg("path"));
    m.def("write_trajectory",
          [](const Trajectory& traj, const std::string& path) { write_trajectory(traj, path); },
          py::arg("trajectory"), py::arg("path"));

    m.def("compute_displacements",
          [](const Trajectory& traj) { return displacements_to_numpy(compute_displacements(traj)); },
          py::arg("trajectory"));
    m.def("reconstruct_positions",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& initial,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& deltas,
             const std::vector<std::string>& species, double dt_fs) {
              if (initial.ndim() != 2 || initial.shape(1) != 3) {
                  throw ShapeMismatch("initial must have shape (N, 3)");
              }
              Frame frame;
              auto iview = initial.unchecked<2>();
              for (py::ssize_t i = 0; i < initial.shape(0); ++i) {
                  frame.positions.push_back({iview(i, 0), iview(i, 1), iview(i, 2)});
              }
              if (deltas.ndim() != 3 || deltas.shape(2) != 3) {
                  throw ShapeMismatch("deltas must have shape (T-1, N, 3)");
              }
              DisplacementSeries series;
              series.n_atoms = static_cast<std::size_t>(deltas.shape(1));
              auto dview = deltas.unchecked<3>();
              for (py::ssize_t t = 0; t < deltas.shape(0); ++t) {
                  std::vector<Vec3> row;
                  for (py::ssize_t i = 0; i < deltas.shape(1); ++i) {
                      row.push_back({dview(t, i, 0), dview(t, i, 1), dview(t, i, 2)});
                  }
                  series.deltas.push_back(std::move(row));
              }
              return reconstruct_positions(frame, series, species, dt_fs);
          },
          py::arg("initial"), py::arg("deltas"), py::arg("species"), py::arg("dt_fs") = 1.0);

    py::class_<MorseParams>(m, "MorseParams")
        .def(py::init([](double d_e_depth, double a, double d_e, double b) {
                 return MorseParams{d_e_depth, a, d_e, b};
             }),
             py::arg("D_e"), py::arg("a"), py::arg("d_e"), py::arg("b") = 0.0)
        .def_readwrite("D_e", &MorseParams::depth)
        .def_readwrite("a", &MorseParams::steepness)
        .def_readwrite("d_e", &MorseParams::eq_dist)
        .def_readwrite("b", &MorseParams::offset)
        .def("__repr__", [](const MorseParams& p) {
            return "MorseParams(D_e=" + format_double(p.depth) + ", a=" + format_double(p.steepness) +
                   ", d_e=" + format_double(p.eq_dist) + ", b=" + format_double(p.offset) + ")";
        });

    m.def("morse_energy", &morse_energy, py::arg("params"), py::arg("d"));

    m.def("fit_morse",
          [](const std::vector<std::pair<double, double>>& samples) {
              const auto [params, report] = fit_morse(samples);
              py::dict rep;
              rep["rmse"] = report.rmse;
              rep["iterations"] = report.iterations;
              rep["converged"] = report.converged;
              return py::make_tuple(params, rep);
          },
          py::arg("samples"));

    py::class_<MorseTable>(m, "MorseTable")
        .def(py::init(&table_from_dict), py::arg("entries"))
        .def("lookup", &MorseTable::lookup, py::arg("species_a"), py::arg("species_b"),
             py::return_value_policy::copy)
        .def("__len__", &MorseTable::size);
    m.def("read_morse_csv", [](const std::string& p) { return read_morse_csv(p); }, py::arg("path"));
    m.def("write_morse_csv",
          [](const MorseTable& t, const std::string& p) { write_morse_csv(t, p); },
          py::arg("table"), py::arg("path"));

    py::class_<ThresholdTable>(m, "ThresholdTable")
        .def("entries", [](const ThresholdTable& t) { return t.entries(); })
        .def("lookup", &ThresholdTable::lookup, py::arg("atom_i"), py::arg("atom_j"),
             py::arg("species_i"), py::arg("species_j"));
    m.def("compute_thresholds",
          [](const Trajectory& traj, const MorseTable& morse, const std::string& granularity) {
              return compute_thresholds(traj, morse, granularity_from_string(granularity));
          },
          py::arg("trajectory"), py::arg("morse"), py::arg("granularity") = "species");

    m.def("generate",
          [](const std::vector<std::pair<std::string, int>>& species_counts, double box_side,
             double temperature_K, int n_steps, double dt_fs, const MorseTable& morse,
             double cutoff, const std::string& thermostat, double gamma_per_fs,
             int rescale_interval, std::uint64_t seed, bool reflective_walls, double mass_amu) {
              SimConfig cfg;
              cfg.species_counts = species_counts;
              cfg.n_atoms = 0;
              for (const auto& [sp, count] : species_counts) cfg.n_atoms += count;
              cfg.box_side = box_side;
              cfg.temperature_K = temperature_K;
              cfg.n_steps = n_steps;
              cfg.dt_fs = dt_fs;
              cfg.morse = morse;
              cfg.cutoff = cutoff;
              if (thermostat == "none") {
                  cfg.thermostat.kind = ThermostatKind::none;
              } else if (thermostat == "langevin") {
                  cfg.thermostat.kind = ThermostatKind::langevin;
              } else if (thermostat == "velocity_rescale") {
                  cfg.thermostat.kind = ThermostatKind::velocity_rescale;
              } else {
                  throw InvalidConfig("unknown thermostat '" + thermostat + "'");
              }
              cfg.thermostat.gamma_per_fs = gamma_per_fs;
              cfg.thermostat.rescale_interval = rescale_interval;
              cfg.seed = seed;
              cfg.reflective_walls = reflective_walls;
              cfg.mass_amu = mass_amu;
              return generate(cfg);
          },
          py::arg("species_counts"), py::arg("box_side"), py::arg("temperature_K"),
          py::arg("n_steps"), py::arg("dt_fs"), py::arg("morse"), py::arg("cutoff"),
          py::arg("thermostat") = "langevin", py::arg("gamma_per_fs") = 0.05,
          py::arg("rescale_interval") = 10, py::arg("seed") = 0,
          py::arg("reflective_walls") = true, py::arg("mass_amu") = 1.0);

    m.def("split_dataset",
          [](const Trajectory& traj, double train_frac, double valid_frac, std::size_t min_frames) {
              auto [train, valid, test] = split_dataset(traj, train_frac, valid_frac, min_frames);
              return py::make_tuple(std::move(train), std::move(valid), std::move(test));
          },
          py::arg("trajectory"), py::arg("train_frac"), py::arg("valid_frac"),
          py::arg("min_frames") = 1);

    py::class_<PyForecaster>(m, "Forecaster")
        .def_property_readonly("history",
                               [](const PyForecaster& f) { return f.ckpt.model.arch.history; })
        .def_property_readonly("horizon",
                               [](const PyForecaster& f) { return f.ckpt.model.arch.horizon; })
        .def_property_readonly("n_params",
                               [](const PyForecaster& f) { return f.ckpt.model.params.size(); })
        .def("save", [](const PyForecaster& f, const std::string& path) {
            save_checkpoint(f.ckpt, path);
        })
        .def_static("load", [](const std::string& path) {
            PyForecaster f;
            f.ckpt = load_checkpoint(path);
            return f;
        })
        .def("rollout", &rollout_from_python, py::arg("seed_history"), py::arg("morse"),
             py::arg("thresholds"), py::arg("total_steps"), py::arg("pii_enabled") = true,
             py::arg("pairs_per_step") = 500, py::arg("seed") = 0,
             py::arg("freeze_policy") = "freeze_all");

    m.def("train_forecaster", &train_forecaster, py::arg("train_trajectory"),
          py::arg("valid_trajectory"), py::arg("morse"), py::arg("thresholds"),
          py::arg("history") = 16, py::arg("horizon") = 8, py::arg("stride") = 1,
          py::arg("normalize") = true, py::arg("backbone") = "mlp",
          py::arg("hidden") = std::vector<int>{48, 48}, py::arg("blocks") = 1,
          py::arg("lambda_") = 5e-4, py::arg("pairs_per_step") = 500, py::arg("batch_size") = 16,
          py::arg("learning_rate") = 0.01, py::arg("clip_norm") = 1.0, py::arg("max_epochs") = 10,
          py::arg("patience") = 3, py::arg("seed") = 0, py::arg("physics_chain") = true);

    m.def("forecast_errors",
          [](const Trajectory& pred, const Trajectory& truth) {
              const ForecastErrors e = forecast_errors(pred, truth);
              py::dict out;
              out["mse_delta"] = e.mse_delta;
              out["mae_delta"] = e.mae_delta;
              out["mse_r"] = e.mse_r;
              out["mae_r"] = e.mae_r;
              return out;
          },
          py::arg("prediction"), py::arg("truth"));

    m.def("violations",
          [](const Trajectory& traj, const MorseTable& morse, const ThresholdTable& thresholds,
             int pairs_per_step, std::uint64_t seed) {
              const ViolationReport r = violations(traj, morse, thresholds, pairs_per_step, seed);
              py::dict out;
              out["v_n"] = r.v_n;
              out["v_r"] = r.v_r;
              out["per_step"] = r.per_step;
              out["pairs_per_step"] = r.pairs_per_step;
              return out;
          },
          py::arg("trajectory"), py::arg("morse"), py::arg("thresholds"),
          py::arg("pairs_per_step"), py::arg("seed") = 0);

    m.def("diffusivity",
          [](const Trajectory& traj, const std::vector<std::string>& species,
             std::size_t fit_begin, std::size_t fit_end, bool multi_origin) {
              const DiffusivityReport r = diffusivity(traj, species, fit_begin, fit_end, multi_origin);
              py::dict out;
              for (const auto& [sp, d] : r.per_species) {
                  py::dict entry;
                  entry["D_A2_per_fs"] = d.d_A2_per_fs;
                  entry["D_m2_per_s"] = d.d_m2_per_s;
                  entry["slope"] = d.slope;
                  entry["intercept"] = d.intercept;
                  entry["r_squared"] = d.r_squared;
                  entry["msd"] = d.msd.msd_A2;
                  entry["t_fs"] = d.msd.time_fs;
                  out[py::str(sp)] = entry;
              }
              return out;
          },
          py::arg("trajectory"), py::arg("species") = std::vector<std::string>{},
          py::arg("fit_begin") = 1, py::arg("fit_end") = 10, py::arg("multi_origin") = true);
}
