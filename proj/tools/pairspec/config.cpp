// Copyright 2026 The pairspec Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <fstream>
#include <set>

#include "pairspec/errors.hpp"

namespace pairspec::cli {

using nlohmann::json;

namespace {

// Object reader that records consumed keys so leftovers can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::size_t count(const std::string& key, std::size_t fallback, std::size_t min = 0) {
    const json* v = find(key);
    if (!v) return fallback;
    return to_count(*v, at(key), min);
  }

  static std::size_t to_count(const json& v, const std::string& path, std::size_t min) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      fail(path, "expected a nonnegative integer, got " + v.dump());
    const auto n = v.get<std::uint64_t>();
    if (n < min) fail(path, "must be at least " + std::to_string(min) + ", got " + v.dump());
    return static_cast<std::size_t>(n);
  }

  int integer(const std::string& key, int fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(at(key), "expected an integer, got " + v->dump());
    return v->get<int>();
  }

  double real(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    return to_real(*v, at(key));
  }

  static double to_real(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number, got " + v.dump());
    return v.get<double>();
  }

  double positive(const std::string& key, double fallback) {
    const double x = real(key, fallback);
    if (!(x > 0.0)) fail(at(key), "must be positive");
    return x;
  }

  double nonnegative(const std::string& key, double fallback) {
    const double x = real(key, fallback);
    if (!(x >= 0.0)) fail(at(key), "must be nonnegative");
    return x;
  }

  bool flag(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(at(key), "expected true or false, got " + v->dump());
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(at(key), "expected a string, got " + v->dump());
    return v->get<std::string>();
  }

  std::string choice(const std::string& key, const std::string& fallback, const std::set<std::string>& allowed) {
    std::string s = text(key, fallback);
    if (!allowed.count(s)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(at(key), "unknown value '" + s + "' (expected one of " + list + ")");
    }
    return s;
  }

  const json* array(const std::string& key) {
    const json* v = find(key);
    if (v && !v->is_array()) fail(at(key), "expected an array");
    return v;
  }

  std::optional<Section> child(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return Section(*v, at(key));
  }

  // Parses a core enum through its parser, reporting failures at this key.
  template <class F>
  auto parsed(const std::string& key, const std::string& fallback, F parse) {
    const std::string s = text(key, fallback);
    try {
      return parse(s);
    } catch (const ConfigError& e) {
      fail(at(key), e.what());
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(at(key), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<std::size_t> count_list(Section& s, const std::string& key, std::vector<std::size_t> fallback,
                                    std::size_t min = 0) {
  const json* v = s.array(key);
  if (!v) return fallback;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v->size(); ++i)
    out.push_back(Section::to_count((*v)[i], s.at(key) + "[" + std::to_string(i) + "]", min));
  return out;
}

std::vector<double> real_list(Section& s, const std::string& key, std::vector<double> fallback) {
  const json* v = s.array(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (std::size_t i = 0; i < v->size(); ++i)
    out.push_back(Section::to_real((*v)[i], s.at(key) + "[" + std::to_string(i) + "]"));
  return out;
}

TaskConfig parse_task(Section s) {
  TaskConfig t;
  t.kind = s.choice("kind", t.kind, {"overlapping_pair", "regions", "random", "sprites", "file"});
  if (t.kind == "regions") {
    t.grid_w = s.count("grid_w", t.grid_w, 1);
    t.grid_h = s.count("grid_h", t.grid_h, 1);
    t.layout = s.choice("layout", t.layout, {"random", "tiled", "explicit"});
    if (t.layout == "random") {
      t.count = s.count("count", t.count, 1);
      t.width = static_cast<int>(s.count("width", static_cast<std::size_t>(t.width), 1));
      t.height = static_cast<int>(s.count("height", static_cast<std::size_t>(t.height), 1));
    } else if (t.layout == "tiled") {
      if (t.grid_w != t.grid_h) Section::fail(s.at("grid_h"), "tiled layout needs a square grid");
      t.tile = static_cast<int>(s.count("tile", static_cast<std::size_t>(t.tile), 1));
      t.stride = static_cast<int>(s.count("stride", static_cast<std::size_t>(t.stride), 1));
    } else {
      const json* rects = s.array("rects");
      if (!rects || rects->empty()) Section::fail(s.at("rects"), "explicit layout needs a nonempty list");
      for (std::size_t i = 0; i < rects->size(); ++i) {
        const std::string path = s.at("rects") + "[" + std::to_string(i) + "]";
        const json& r = (*rects)[i];
        if (!r.is_array() || r.size() != 4) Section::fail(path, "expected [x0, y0, width, height]");
        for (const auto& v : r)
          if (!v.is_number_integer()) Section::fail(path, "expected integers");
        t.rects.push_back({r[0].get<int>(), r[1].get<int>(), r[2].get<int>(), r[3].get<int>()});
      }
    }
  } else if (t.kind == "random") {
    t.latents = s.count("latents", t.latents, 1);
    t.views = s.count("views", t.views, 1);
    t.density = s.positive("density", t.density);
  } else if (t.kind == "sprites") {
    auto& p = t.sprites;
    p.grid = s.count("grid", p.grid, 2);
    p.class_count = s.count("classes", p.class_count, 1);
    p.sprites_per_class = s.count("sprites_per_class", p.sprites_per_class, 1);
    p.copies = s.count("copies", p.copies, 1);
    p.k = s.count("k", p.k, 1);
    p.jitter = static_cast<int>(s.count("jitter", static_cast<std::size_t>(p.jitter)));
    p.blur = s.nonnegative("blur", p.blur);
    p.strokes = s.count("strokes", p.strokes, 1);
    p.stroke_wobble = s.nonnegative("stroke_wobble", p.stroke_wobble);
    p.floor_mass = s.positive("floor_mass", p.floor_mass);
  } else if (t.kind == "file") {
    t.path = s.text("path", "");
    if (t.path.empty()) Section::fail(s.at("path"), "file task needs a path");
  }
  s.finish();
  return t;
}

contrastive::MlpSpec parse_encoder(Section s, contrastive::MlpSpec e) {
  e.hidden = count_list(s, "hidden", e.hidden, 1);
  e.activation = s.parsed("activation", contrastive::to_string(e.activation), contrastive::parse_activation);
  s.finish();
  return e;
}

std::optional<contrastive::Encoding> parse_encoding(Section& s) {
  const std::string e = s.choice("encoding", "auto", {"auto", "onehot", "coords", "counts"});
  if (e == "auto") return std::nullopt;
  return contrastive::parse_encoding(e);
}

ModelConfig parse_model(Section s) {
  ModelConfig m;
  if (auto e = s.child("encoder")) m.spec.encoder = parse_encoder(*e, m.spec.encoder);
  m.encoding = parse_encoding(s);
  if (auto hs = s.child("head")) {
    auto& h = m.spec.head;
    h.kind = hs->parsed("kind", contrastive::to_string(h.kind), contrastive::parse_head_kind);
    h.dim = hs->count("dim", h.dim, 1);
    if (const json* c = hs->find("norm_c"); c && !c->is_null()) {
      h.norm_c = Section::to_real(*c, hs->at("norm_c"));
      if (!(*h.norm_c > 0.0)) Section::fail(hs->at("norm_c"), "must be positive");
    }
    h.tau = hs->positive("tau", h.tau);
    h.learn_tau = hs->flag("learn_tau", h.learn_tau);
    h.bias = hs->parsed("bias", contrastive::to_string(h.bias), contrastive::parse_bias_mode);
    h.alpha = hs->positive("alpha", h.alpha);
    hs->finish();
  }
  s.finish();
  return m;
}

contrastive::LossSpec parse_loss(Section s, contrastive::LossSpec l) {
  l.xent = s.nonnegative("xent", l.xent);
  l.logistic = s.nonnegative("logistic", l.logistic);
  l.spectral = s.nonnegative("spectral", l.spectral);
  l.negatives = s.count("negatives", l.negatives, 1);
  l.population = s.flag("population", l.population);
  l.bias_reg = s.nonnegative("bias_reg", l.bias_reg);
  if (l.xent + l.logistic + l.spectral <= 0.0) Section::fail(s.at("spectral"), "at least one loss weight must be positive");
  s.finish();
  return l;
}

contrastive::TrainConfig parse_train(Section s, contrastive::TrainConfig t) {
  t.steps = s.count("steps", t.steps);
  t.batch = s.count("batch", t.batch, 1);
  t.adam.lr = s.positive("lr", t.adam.lr);
  t.adam.beta1 = s.nonnegative("beta1", t.adam.beta1);
  t.adam.beta2 = s.nonnegative("beta2", t.adam.beta2);
  if (t.adam.beta1 >= 1.0) Section::fail(s.at("beta1"), "must be below 1");
  if (t.adam.beta2 >= 1.0) Section::fail(s.at("beta2"), "must be below 1");
  t.adam.eps = s.positive("eps", t.adam.eps);
  s.finish();
  return t;
}

analysis::BoundSpec parse_bound(Section s) {
  analysis::BoundSpec b;
  b.coefficients = real_list(s, "coefficients", {1.0});
  b.d = s.count("d", b.d, 1);
  b.radius = s.nonnegative("radius", b.radius);
  b.n = s.count("n", b.n, 1);
  b.trials = s.count("trials", b.trials);
  b.noise = s.nonnegative("noise", b.noise);
  b.iterations = s.count("iterations", b.iterations, 1);
  b.step = s.positive("step", b.step);
  s.finish();
  return b;
}

AnalysisConfig parse_analysis(Section s) {
  AnalysisConfig a;
  a.eps = s.nonnegative("eps", a.eps);
  a.challengers = s.count("challengers", a.challengers);
  a.dims = count_list(s, "dims", a.dims, 1);
  a.assumption_trials = s.count("assumption_trials", a.assumption_trials);
  a.perturbations = s.count("perturbations", a.perturbations);
  if (const json* bounds = s.array("bounds"))
    for (std::size_t i = 0; i < bounds->size(); ++i)
      a.bounds.push_back(parse_bound(Section((*bounds)[i], s.at("bounds") + "[" + std::to_string(i) + "]")));
  if (auto c = s.child("chain")) {
    a.chain.start = c->count("start", a.chain.start);
    a.chain.steps = c->count("steps", a.chain.steps);
    a.chain.functions = c->count("functions", a.chain.functions, 1);
    c->finish();
  }
  if (auto d = s.child("downstream")) {
    auto& ds = a.downstream;
    ds.representation = d->choice("representation", ds.representation, {"exact", "kpca", "neuralef"});
    ds.train = d->count("train", ds.train, 1);
    ds.val = d->count("val", ds.val, 1);
    ds.test = d->count("test", ds.test, 1);
    ds.l2 = real_list(*d, "l2", ds.l2);
    for (std::size_t i = 0; i < ds.l2.size(); ++i)
      if (!(ds.l2[i] >= 0.0)) Section::fail(d->at("l2") + "[" + std::to_string(i) + "]", "must be nonnegative");
    ds.dims = count_list(*d, "dims", ds.dims);
    d->finish();
  }
  s.finish();
  return a;
}

}  // namespace

const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order = {"task",         "exact",    "train",     "kpca",
                                                 "align",        "neuralef", "minimax",   "bound",
                                                 "verify-minima", "assumption", "downstream", "chain"};
  return order;
}

ExperimentConfig parse_config(const json& j) {
  Section s(j, "config");
  ExperimentConfig c;
  if (const json* v = s.find("seed")) {
    if (!v->is_number_unsigned()) Section::fail(s.at("seed"), "expected a nonnegative integer, got " + v->dump());
    c.seed = v->get<std::uint64_t>();
  }
  c.threads = s.count("threads", c.threads);
  c.out = s.text("out", c.out);
  if (auto t = s.child("task")) c.task = parse_task(*t);
  if (auto m = s.child("model")) c.model = parse_model(*m);
  // Enumerated tasks train on the exact pair law unless the config says otherwise.
  c.loss.population = c.task.kind != "sprites" && c.task.kind != "file";
  c.neuralef.population = c.loss.population;
  if (auto l = s.child("loss")) c.loss = parse_loss(*l, c.loss);
  if (auto t = s.child("train")) c.train = parse_train(*t, c.train);
  if (auto sp = s.child("spectra")) {
    c.spectra.top = sp->count("top", c.spectra.top, 1);
    c.spectra.landmark_fraction = sp->positive("landmark_fraction", c.spectra.landmark_fraction);
    if (c.spectra.landmark_fraction > 1.0) Section::fail(sp->at("landmark_fraction"), "must not exceed 1");
    c.spectra.samples_per_latent = sp->count("samples_per_latent", c.spectra.samples_per_latent, 1);
    sp->finish();
  }
  if (auto n = s.child("neuralef")) {
    auto& cfg = c.neuralef;
    cfg.count = n->count("count", cfg.count, 1);
    if (auto e = n->child("encoder")) cfg.encoder = parse_encoder(*e, cfg.encoder);
    c.neuralef_encoding = parse_encoding(*n);
    cfg.mix = n->real("mix", cfg.mix);
    if (!(cfg.mix > 0.0 && cfg.mix <= 1.0)) Section::fail(n->at("mix"), "must lie in (0, 1]");
    cfg.ema = n->real("ema", cfg.ema);
    if (!(cfg.ema >= 0.0 && cfg.ema < 1.0)) Section::fail(n->at("ema"), "must lie in [0, 1)");
    cfg.population = n->flag("population", cfg.population);
    cfg.holdout = n->count("holdout", cfg.holdout, 1);
    if (auto t = n->child("train")) cfg.train = parse_train(*t, cfg.train);
    n->finish();
  }
  if (auto a = s.child("analysis")) c.analysis = parse_analysis(*a);
  if (const json* st = s.array("stages")) {
    c.stages.clear();
    for (std::size_t i = 0; i < st->size(); ++i) {
      const std::string path = s.at("stages") + "[" + std::to_string(i) + "]";
      const json& v = (*st)[i];
      if (!v.is_string()) Section::fail(path, "expected a stage name");
      const auto& order = stage_order();
      if (std::find(order.begin(), order.end(), v.get<std::string>()) == order.end())
        Section::fail(path, "unknown stage '" + v.get<std::string>() + "'");
      c.stages.push_back(v.get<std::string>());
    }
  }
  s.finish();

  const auto& h = c.model.spec.head;
  if (h.kind == contrastive::HeadKind::linear && (c.loss.xent > 0.0 || c.loss.logistic > 0.0))
    Section::fail("config.loss", "xent and logistic need a positive kernel; use a hypersphere or rational_quadratic head");
  if (h.norm_c && h.kind != contrastive::HeadKind::linear)
    Section::fail("config.model.head.norm_c", "only linear heads take a norm constraint");
  if (c.loss.xent > 0.0 && !c.loss.population && c.train.batch < 2)
    Section::fail("config.train.batch", "sampled xent needs a batch of at least 2");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

namespace {

json encoder_json(const contrastive::MlpSpec& e) {
  return {{"hidden", e.hidden}, {"activation", contrastive::to_string(e.activation)}};
}

json train_json(const contrastive::TrainConfig& t) {
  return {{"steps", t.steps}, {"batch", t.batch}, {"lr", t.adam.lr},
          {"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}};
}

std::string encoding_name(const std::optional<contrastive::Encoding>& e) {
  return e ? contrastive::to_string(*e) : "auto";
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  json task = {{"kind", c.task.kind}};
  const TaskConfig& t = c.task;
  if (t.kind == "regions") {
    task.update({{"grid_w", t.grid_w}, {"grid_h", t.grid_h}, {"layout", t.layout}});
    if (t.layout == "random") task.update({{"count", t.count}, {"width", t.width}, {"height", t.height}});
    if (t.layout == "tiled") task.update({{"tile", t.tile}, {"stride", t.stride}});
    if (t.layout == "explicit") {
      json rects = json::array();
      for (const auto& r : t.rects) rects.push_back({r.x0, r.y0, r.width, r.height});
      task["rects"] = rects;
    }
  } else if (t.kind == "random") {
    task.update({{"latents", t.latents}, {"views", t.views}, {"density", t.density}});
  } else if (t.kind == "sprites") {
    const auto& p = t.sprites;
    task.update({{"grid", p.grid}, {"classes", p.class_count}, {"sprites_per_class", p.sprites_per_class},
                 {"copies", p.copies}, {"k", p.k}, {"jitter", p.jitter}, {"blur", p.blur}, {"strokes", p.strokes},
                 {"stroke_wobble", p.stroke_wobble}, {"floor_mass", p.floor_mass}});
  } else if (t.kind == "file") {
    task["path"] = t.path;
  }
  const auto& h = c.model.spec.head;
  json head = {{"kind", contrastive::to_string(h.kind)}, {"dim", h.dim}, {"tau", h.tau}, {"learn_tau", h.learn_tau},
               {"bias", contrastive::to_string(h.bias)}, {"alpha", h.alpha}};
  head["norm_c"] = h.norm_c ? json(*h.norm_c) : json(nullptr);
  json bounds = json::array();
  for (const auto& b : c.analysis.bounds)
    bounds.push_back({{"coefficients", b.coefficients}, {"d", b.d}, {"radius", b.radius}, {"n", b.n},
                      {"trials", b.trials}, {"noise", b.noise}, {"iterations", b.iterations}, {"step", b.step}});
  const auto& a = c.analysis;
  const auto& n = c.neuralef;
  return {
      {"seed", c.seed},
      {"threads", c.threads},
      {"out", c.out},
      {"task", task},
      {"model",
       {{"encoder", encoder_json(c.model.spec.encoder)}, {"encoding", encoding_name(c.model.encoding)}, {"head", head}}},
      {"loss",
       {{"xent", c.loss.xent}, {"logistic", c.loss.logistic}, {"spectral", c.loss.spectral},
        {"negatives", c.loss.negatives}, {"population", c.loss.population}, {"bias_reg", c.loss.bias_reg}}},
      {"train", train_json(c.train)},
      {"spectra",
       {{"top", c.spectra.top}, {"landmark_fraction", c.spectra.landmark_fraction},
        {"samples_per_latent", c.spectra.samples_per_latent}}},
      {"neuralef",
       {{"count", n.count}, {"encoder", encoder_json(n.encoder)}, {"encoding", encoding_name(c.neuralef_encoding)},
        {"mix", n.mix}, {"ema", n.ema}, {"population", n.population}, {"holdout", n.holdout},
        {"train", train_json(n.train)}}},
      {"analysis",
       {{"eps", a.eps},
        {"challengers", a.challengers},
        {"dims", a.dims},
        {"assumption_trials", a.assumption_trials},
        {"perturbations", a.perturbations},
        {"bounds", bounds},
        {"chain", {{"start", a.chain.start}, {"steps", a.chain.steps}, {"functions", a.chain.functions}}},
        {"downstream",
         {{"representation", a.downstream.representation}, {"train", a.downstream.train}, {"val", a.downstream.val},
          {"test", a.downstream.test}, {"l2", a.downstream.l2}, {"dims", a.downstream.dims}}}}},
      {"stages", c.stages},
  };
}

tasklab::FiniteTask build_task(const TaskConfig& c, std::uint64_t seed) {
  numkit::Rng rng(seed, "task");
  if (c.kind == "overlapping_pair") return tasklab::overlapping_pair_task();
  if (c.kind == "random") return tasklab::gen_random_task(c.latents, c.views, rng, c.density);
  if (c.kind == "sprites") return tasklab::gen_sprite_task(c.sprites, rng);
  if (c.kind == "file") {
    std::ifstream in(c.path);
    if (!in) throw ConfigError("config.task.path: cannot open '" + c.path + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return tasklab::task_from_json(text);
  }
  std::vector<tasklab::Rect> rects;
  if (c.layout == "random")
    rects = tasklab::random_covering_regions(c.grid_w, c.grid_h, c.count, c.width, c.height, rng);
  else if (c.layout == "tiled")
    rects = tasklab::tiled_regions(c.grid_w, c.tile, c.stride);
  else
    rects = c.rects;
  return tasklab::gen_regions_task(c.grid_w, c.grid_h, rects);
}

}  // namespace pairspec::cli
