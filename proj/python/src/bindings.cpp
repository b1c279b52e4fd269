#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tempo_meta/backbone.hpp"
#include "tempo_meta/error.hpp"
#include "tempo_meta/evaluation.hpp"
#include "tempo_meta/experiment.hpp"
#include "tempo_meta/gradcheck.hpp"
#include "tempo_meta/meta_learner.hpp"
#include "tempo_meta/synthetic.hpp"
#include "tempo_meta/tkg_data.hpp"

namespace py = pybind11;
using namespace tempo_meta;

namespace {

const TrilinearBackbone kBackbone;

using Quad = std::tuple<EntityId, RelationId, EntityId, TimeIndex>;

std::vector<Quadruple> to_quads(const std::vector<Quad>& in) {
  std::vector<Quadruple> out;
  out.reserve(in.size());
  for (const auto& [s, r, o, t] : in) out.push_back({s, r, o, t});
  return out;
}

std::vector<Quad> from_quads(const std::vector<Quadruple>& in) {
  std::vector<Quad> out;
  out.reserve(in.size());
  for (const Quadruple& q : in) out.emplace_back(q.subject, q.relation, q.object, q.time);
  return out;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["mrr"] = m.mrr;
  d["hits1"] = m.hits1;
  d["hits3"] = m.hits3;
  d["hits10"] = m.hits10;
  d["count"] = m.count;
  return d;
}

RankLog rank_log_from(const std::vector<std::tuple<TimeIndex, EntityId, EntityId, std::int64_t>>& rows) {
  RankLog log;
  for (const auto& [t, anchor, gold, rank] : rows) {
    log.push_back({t, anchor, 0, Direction::kForward, gold, rank});
  }
  return log;
}

py::list rank_log_to_py(const RankLog& log) {
  py::list out;
  for (const RankEntry& e : log) {
    py::dict d;
    d["t"] = e.t;
    d["anchor"] = e.anchor;
    d["relation"] = e.relation;
    d["direction"] = e.direction == Direction::kForward ? "forward" : "inverse";
    d["gold"] = e.gold;
    d["rank"] = e.rank;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_tempo_meta, m) {
  m.doc() = "Gated temporal meta-learning for TKG completion";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<RangeError>(m, "RangeError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // ---- data ----
  m.def("parse_quadruples",
        [](const std::string& text, std::int64_t time_gap) {
          std::istringstream in(text);
          return from_quads(parse_quadruples(in, time_gap).quads);
        },
        py::arg("text"), py::arg("time_gap") = 1);

  py::class_<Split>(m, "Split")
      .def_readonly("train_end", &Split::train_end)
      .def_readonly("valid_end", &Split::valid_end)
      .def_readonly("test_end", &Split::test_end)
      .def("__eq__", [](const Split& a, const Split& b) { return a == b; })
      .def("__repr__", [](const Split& s) {
        return "Split(train_end=" + std::to_string(s.train_end) + ", valid_end=" +
               std::to_string(s.valid_end) + ", test_end=" + std::to_string(s.test_end) + ")";
      });

  m.def("compute_split",
        [](TimeIndex n, std::array<double, 3> p) { return compute_split(n, p); },
        py::arg("num_timestamps"), py::arg("proportions") = kDefaultSplit);

  py::class_<TemporalKG>(m, "TemporalKG")
      .def_property_readonly("num_entities", &TemporalKG::num_entities)
      .def_property_readonly("num_relations", &TemporalKG::num_relations)
      .def_property_readonly("num_timestamps", &TemporalKG::num_timestamps)
      .def_property_readonly("split", &TemporalKG::split)
      .def("num_facts", [](const TemporalKG& kg) { return kg.num_facts(); })
      .def("facts", [](const TemporalKG& kg, TimeIndex t) { return from_quads(kg.at(t).facts); },
           py::arg("t"))
      .def("to_text", [](const TemporalKG& kg, std::int64_t gap) { return format_quadruples(kg, gap); },
           py::arg("time_gap") = 1)
      .def("__eq__", [](const TemporalKG& a, const TemporalKG& b) { return a == b; });

  m.def("build_temporal_kg",
        [](const std::vector<Quad>& quads, std::size_t min_entities, std::size_t min_relations,
           bool split, std::array<double, 3> proportions) {
          TemporalKG kg = build_temporal_kg(to_quads(quads), min_entities, min_relations);
          return split ? split_by_time(std::move(kg), proportions) : kg;
        },
        py::arg("quads"), py::arg("min_entities") = 0, py::arg("min_relations") = 0,
        py::arg("split") = true, py::arg("proportions") = kDefaultSplit);

  py::enum_<HistoryMode>(m, "HistoryMode")
      .value("ALL_PRECEDING", HistoryMode::kAllPreceding)
      .value("TRAIN_ONLY", HistoryMode::kTrainOnly);

  py::class_<HistoryIndex>(m, "HistoryIndex").def("count", &HistoryIndex::count);
  m.def("build_history_index", &build_history_index, py::arg("kg"),
        py::arg("mode") = HistoryMode::kAllPreceding);

  // ---- backbone ----
  py::class_<ParamSet>(m, "ParamSet")
      .def_readwrite("entity", &ParamSet::entity)
      .def_readwrite("relation", &ParamSet::relation)
      .def_readwrite("other", &ParamSet::other)
      .def_readonly("seed", &ParamSet::seed)
      .def_property_readonly("dim", &ParamSet::dim)
      .def("__eq__", [](const ParamSet& a, const ParamSet& b) {
        return static_cast<const Components&>(a) == static_cast<const Components&>(b);
      });

  m.def("init_params", &init_params, py::arg("num_entities"), py::arg("num_relations"),
        py::arg("dim"), py::arg("seed") = 0);
  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("params"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def("score",
        [](const ParamSet& p, EntityId anchor, DirectedRelation rel,
           const std::vector<EntityId>& candidates) {
          return kBackbone.score(p, anchor, rel, candidates);
        },
        py::arg("params"), py::arg("anchor"), py::arg("relation"), py::arg("candidates"));
  m.def("loss",
        [](const ParamSet& p, const std::vector<Quad>& facts) {
          return kBackbone.loss(p, Snapshot{1, to_quads(facts)});
        },
        py::arg("params"), py::arg("facts"));
  m.def("loss_and_grad",
        [](const ParamSet& p, const std::vector<Quad>& facts) {
          const LossGrad lg = kBackbone.grad(p, Snapshot{1, to_quads(facts)});
          py::dict g;
          g["entity"] = lg.grad.entity;
          g["relation"] = lg.grad.relation;
          g["other"] = lg.grad.other;
          return py::make_tuple(lg.loss, g);
        },
        py::arg("params"), py::arg("facts"));

  // ---- meta learner ----
  py::enum_<Ablation>(m, "Ablation")
      .value("FULL", Ablation::kFull)
      .value("NO_GATE", Ablation::kNoGate)
      .value("SHARED_GATE", Ablation::kSharedGate);
  py::enum_<OptimizerKind>(m, "Optimizer")
      .value("SGD", OptimizerKind::kSgd)
      .value("ADAM", OptimizerKind::kAdam);
  py::enum_<RunMode>(m, "RunMode")
      .value("META", RunMode::kMeta)
      .value("PLAIN", RunMode::kPlain)
      .value("FINETUNE", RunMode::kFinetune);

  py::class_<MetaConfig>(m, "MetaConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &MetaConfig::alpha)
      .def_readwrite("beta", &MetaConfig::beta)
      .def_readwrite("l2", &MetaConfig::l2)
      .def_readwrite("gate_lr", &MetaConfig::gate_lr)
      .def_readwrite("dim", &MetaConfig::dim)
      .def_readwrite("epochs", &MetaConfig::epochs)
      .def_readwrite("seed", &MetaConfig::seed)
      .def_readwrite("test_steps", &MetaConfig::test_steps)
      .def_readwrite("ablation", &MetaConfig::ablation)
      .def_readwrite("gate_update_in_eval", &MetaConfig::gate_update_in_eval)
      .def_readwrite("optimizer", &MetaConfig::optimizer)
      .def("validate", &MetaConfig::validate)
      .def("to_text", [](const MetaConfig& c) {
        std::ostringstream s;
        write_config(s, c);
        return s.str();
      })
      .def_static("from_text", [](const std::string& text) {
        std::istringstream in(text);
        return parse_config(in);
      });

  py::class_<GateSet>(m, "GateSet")
      .def_static("zeros", &GateSet::zeros)
      .def_readwrite("ent", &GateSet::ent)
      .def_readwrite("rel", &GateSet::rel)
      .def_readwrite("other", &GateSet::other);

  m.def("init_support_params",
        [](const ParamSet& prev, const ParamSet& prevprev, const GateSet& gates) {
          return init_support_params(ParamHistory{prev, prevprev}, gates);
        },
        py::arg("prev"), py::arg("prevprev"), py::arg("gates"));

  py::class_<MetaState>(m, "MetaState")
      .def_property_readonly("params", [](const MetaState& s) { return s.history.prev; })
      .def_property_readonly("prev_params", [](const MetaState& s) { return s.history.prevprev; })
      .def_readonly("gates", &MetaState::gates);

  m.def("train",
        [](const TemporalKG& kg, const MetaConfig& cfg) {
          TrainResult r;
          {
            py::gil_scoped_release release;
            r = train(kg, cfg, kBackbone);
          }
          py::list log;
          for (const LossRecord& rec : r.log) {
            py::dict d;
            d["epoch"] = rec.epoch;
            d["t"] = rec.t;
            d["support_loss"] = rec.support_loss;
            d["query_loss"] = rec.query_loss;
            d["gate_ent_mean"] = rec.gate_ent_mean;
            d["gate_rel_mean"] = rec.gate_rel_mean;
            d["gate_other_mean"] = rec.gate_other_mean;
            log.append(d);
          }
          return py::make_tuple(std::move(r.state), log);
        },
        py::arg("kg"), py::arg("config"), "Meta-train on the train span; returns (MetaState, loss log).");

  m.def("evaluate",
        [](const TemporalKG& kg, const MetaState& state, const MetaConfig& cfg) {
          AdaptResult r;
          {
            py::gil_scoped_release release;
            r = evaluate_meta(kg, state, cfg, kBackbone);
          }
          return rank_log_to_py(*r.ranks);
        },
        py::arg("kg"), py::arg("state"), py::arg("config"));

  m.def("run_experiment",
        [](const TemporalKG& kg, const MetaConfig& cfg, RunMode mode) {
          ExperimentResult r;
          {
            py::gil_scoped_release release;
            r = run_experiment(kg, cfg, mode, kBackbone);
          }
          return rank_log_to_py(r.test_ranks);
        },
        py::arg("kg"), py::arg("config"), py::arg("mode") = RunMode::kMeta);

  // ---- evaluation ----
  m.def("pessimistic_rank",
        [](const std::vector<double>& scores, EntityId gold) { return pessimistic_rank(scores, gold); },
        py::arg("scores"), py::arg("gold"));
  m.def("compute_metrics",
        [](const std::vector<std::int64_t>& ranks) {
          RankLog log;
          for (std::int64_t r : ranks) log.push_back({1, 0, 0, Direction::kForward, 0, r});
          return metrics_dict(compute_metrics(log));
        },
        py::arg("ranks"));
  m.def("report",
        [](const TemporalKG& kg, const py::list& ranks, std::optional<int> periods,
           std::optional<std::vector<std::uint32_t>> history_bounds) {
          std::vector<std::tuple<TimeIndex, EntityId, EntityId, std::int64_t>> rows;
          for (const auto& item : ranks) {
            const py::dict d = item.cast<py::dict>();
            rows.emplace_back(d["t"].cast<TimeIndex>(), d["anchor"].cast<EntityId>(),
                              d["gold"].cast<EntityId>(), d["rank"].cast<std::int64_t>());
          }
          ReportOptions opts;
          opts.periods = periods;
          opts.history_bounds = history_bounds;
          return json_to_py(to_json(make_report(kg, rank_log_from(rows), opts)));
        },
        py::arg("kg"), py::arg("ranks"), py::arg("periods") = py::none(),
        py::arg("history_bounds") = py::none());

  // ---- synthetic ----
  py::class_<RegimeSpec>(m, "RegimeSpec")
      .def(py::init<>())
      .def_readwrite("num_entities", &RegimeSpec::num_entities)
      .def_readwrite("num_relations", &RegimeSpec::num_relations)
      .def_readwrite("num_groups", &RegimeSpec::num_groups)
      .def_readwrite("timestamps", &RegimeSpec::timestamps)
      .def_readwrite("changepoint", &RegimeSpec::changepoint)
      .def_readwrite("facts_per_snapshot", &RegimeSpec::facts_per_snapshot)
      .def_readwrite("noise_rate", &RegimeSpec::noise_rate)
      .def_readwrite("cold_entity_fraction", &RegimeSpec::cold_entity_fraction)
      .def_readwrite("popularity_skew", &RegimeSpec::popularity_skew)
      .def_readwrite("shift_fraction", &RegimeSpec::shift_fraction)
      .def_readwrite("seed", &RegimeSpec::seed);

  m.def("changepoint_at", &changepoint_at, py::arg("fraction"), py::arg("timestamps"));
  m.def("generate",
        [](const RegimeSpec& spec) {
          SyntheticDataset d = generate(spec);
          return py::make_tuple(split_by_time(std::move(d.kg)), json_to_py(sidecar_json(d)));
        },
        py::arg("spec"));

  m.def("gradcheck",
        [](std::uint64_t seed, std::size_t instances) {
          const GradCheckSuiteResult r = run_gradcheck_suite(seed, instances);
          return py::make_tuple(r.backbone.max_rel_error, r.gates.max_rel_error);
        },
        py::arg("seed") = 0, py::arg("instances") = 8);
}
