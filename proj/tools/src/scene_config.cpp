#include "scene_config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "noisecine/error.hpp"

namespace noisecine::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, Method, std::less<>> kMethods = {
    {"crystal", Method::crystal}, {"liquid", Method::liquid},   {"img2vid", Method::img2vid},
    {"layers", Method::layers},   {"vid2vid", Method::vid2vid}, {"upscale", Method::upscale},
    {"composite", Method::composite},
};

[[noreturn]] void invalid(const std::string& key, const std::string& what)
{
    fail(Errc::validation, "config: \"" + key + "\" " + what);
}

// One JSON object being read; remembers which keys were consumed.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            invalid(path_.empty() ? "<root>" : path_, "must be an object");
        }
    }

    std::string key_path(std::string_view key) const
    {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    const json* find(std::string_view key)
    {
        used_.emplace(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    const json& require(std::string_view key)
    {
        const json* v = find(key);
        if (v == nullptr) {
            invalid(key_path(key), "is required");
        }
        return *v;
    }

    bool read(std::string_view key, bool& out)
    {
        const json* v = find(key);
        if (v == nullptr) {
            return false;
        }
        if (!v->is_boolean()) {
            invalid(key_path(key), "must be true or false");
        }
        out = v->get<bool>();
        return true;
    }

    bool read(std::string_view key, std::string& out)
    {
        const json* v = find(key);
        if (v == nullptr) {
            return false;
        }
        if (!v->is_string()) {
            invalid(key_path(key), "must be a string");
        }
        out = v->get<std::string>();
        return true;
    }

    bool read(std::string_view key, double& out, double lo, double hi)
    {
        const json* v = find(key);
        if (v == nullptr) {
            return false;
        }
        if (!v->is_number()) {
            invalid(key_path(key), "must be a number");
        }
        out = v->get<double>();
        if (!(out >= lo && out <= hi)) {
            std::ostringstream range;
            range << "must be in [" << lo << ", " << hi << "], got " << out;
            invalid(key_path(key), range.str());
        }
        return true;
    }

    bool read(std::string_view key, int& out, int lo, int hi)
    {
        const json* v = find(key);
        if (v == nullptr) {
            return false;
        }
        if (!v->is_number_integer()) {
            invalid(key_path(key), "must be an integer");
        }
        const auto value = v->get<std::int64_t>();
        if (value < lo || value > hi) {
            invalid(key_path(key), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " +
                                       std::to_string(value));
        }
        out = static_cast<int>(value);
        return true;
    }

    bool read(std::string_view key, std::uint64_t& out)
    {
        const json* v = find(key);
        if (v == nullptr) {
            return false;
        }
        if (!v->is_number_unsigned()) {
            invalid(key_path(key), "must be a non-negative integer");
        }
        out = v->get<std::uint64_t>();
        return true;
    }

    bool read_path(std::string_view key, const fs::path& base, fs::path& out)
    {
        std::string text;
        if (!read(key, text)) {
            return false;
        }
        if (text.empty()) {
            invalid(key_path(key), "must not be empty");
        }
        const fs::path p(text);
        out = (p.is_absolute() ? p : base / p).lexically_normal();
        return true;
    }

    bool read_path(std::string_view key, const fs::path& base, std::optional<fs::path>& out)
    {
        fs::path p;
        if (!read_path(key, base, p)) {
            return false;
        }
        out = p;
        return true;
    }

    // Rejects keys never looked at; known-but-unused keys get their own message.
    void finish(const std::set<std::string, std::less<>>& known = {}, std::string_view method = {}) const
    {
        for (const auto& item : j_.items()) {
            if (used_.count(item.key()) != 0) {
                continue;
            }
            if (known.count(item.key()) != 0) {
                invalid(key_path(item.key()), "is not used by method " + std::string(method));
            }
            invalid(key_path(item.key()), "is not a recognised key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string, std::less<>> used_;
};

std::optional<Reader> section(Reader& parent, std::string_view key)
{
    const json* v = parent.find(key);
    if (v == nullptr) {
        return std::nullopt;
    }
    return Reader(*v, parent.key_path(key));
}

std::size_t positive_dim(const json& v, const std::string& key)
{
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0 || v.get<std::uint64_t>() > (1u << 20)) {
        invalid(key, "entries must be positive integers");
    }
    return v.get<std::size_t>();
}

void read_schedule(Reader& root, SceneConfig& c)
{
    if (auto s = section(root, "schedule")) {
        s->read("steps", c.schedule.steps, 1, kTrainTimesteps);
        s->read("switch", c.schedule.switch_fraction, 0.0, 1.0);
        s->finish();
    }
}

void read_backend(Reader& root, SceneConfig& c)
{
    if (auto b = section(root, "backend")) {
        if (b->read("kind", c.backend.kind) && c.backend.kind != "mock" && c.backend.kind != "bridge") {
            invalid(b->key_path("kind"), "must be \"mock\" or \"bridge\"");
        }
        b->read("command", c.backend.command);
        b->finish();
    }
    if (c.backend.kind == "bridge" && c.backend.command.empty()) {
        invalid("backend.command", "is required for the bridge backend");
    }
}

void read_calibration(Reader& root, SceneConfig& c)
{
    if (auto s = section(root, "calibration")) {
        const double inf = std::numeric_limits<double>::max();
        s->read("max_velocity", c.calibration.max_velocity, 1e-9, inf);
        s->read("max_amplitude", c.calibration.max_amplitude, 1e-9, inf);
        s->read("period_min", c.calibration.period_min, 1e-9, inf);
        s->read("period_max", c.calibration.period_max, 1e-9, inf);
        s->read("white_threshold", c.calibration.white_threshold, 1e-9, 1.0);
        if (c.calibration.period_max < c.calibration.period_min) {
            invalid("calibration.period_max", "must be >= calibration.period_min");
        }
        s->finish();
    }
}

void read_wrap(Reader& s, SceneConfig& c)
{
    s.read("wrap_x", c.wrap_x);
    s.read("wrap_y", c.wrap_y);
}

void read_crystal(Reader& root, const fs::path& base, SceneConfig& c)
{
    auto s = section(root, "crystal");
    if (!s) {
        return;
    }
    const int lim = 1 << 16;
    if (auto shift = section(*s, "shift")) {
        shift->read("dx", c.shift.dx, -lim, lim);
        shift->read("dy", c.shift.dy, -lim, lim);
        shift->read("wrap_x", c.shift.wrap_x);
        shift->read("wrap_y", c.shift.wrap_y);
        shift->finish();
    }
    if (auto shear = section(*s, "shear")) {
        ShearSpec spec;
        shear->require("horizon_row");
        shear->read("horizon_row", spec.horizon_row, 0, lim);
        shear->read("near", spec.near, -lim, lim);
        shear->read("far", spec.far, -lim, lim);
        shear->read("wrap", spec.wrap);
        shear->finish();
        c.shear = spec;
    }
    if (const json* pieces = s->find("mosaic")) {
        if (!pieces->is_array()) {
            invalid(s->key_path("mosaic"), "must be an array");
        }
        for (std::size_t i = 0; i < pieces->size(); ++i) {
            Reader p((*pieces)[i], s->key_path("mosaic") + "[" + std::to_string(i) + "]");
            MosaicSpec spec;
            p.require("mask");
            p.read_path("mask", base, spec.mask);
            p.read("dx", spec.dx, -lim, lim);
            p.read("dy", spec.dy, -lim, lim);
            p.read("wrap", spec.wrap);
            p.finish();
            c.mosaic.push_back(spec);
        }
    }
    s->finish();
}

void read_liquid(Reader& root, SceneConfig& c)
{
    if (!c.flow_map) {
        invalid("flow_map", "is required for method liquid");
    }
    auto s = section(root, "liquid");
    if (!s) {
        return;
    }
    s->read("beta", c.beta, 0.0, 1e6);
    s->read("floor", c.floor, 1e-9, 1.0);
    double delta = 1.0;
    if (s->read("kurtosis_delta", delta, 1e-6, 1e6)) {
        c.kurtosis_delta = delta;
    }
    s->read("inject_image", c.inject_image, 0.0, 1e6);
    s->read("inject_latent", c.inject_latent, 0.0, 1e6);
    read_wrap(*s, c);
    s->finish();
}

void read_img2img(Reader& s, SceneConfig& c)
{
    s.read("strength", c.strength, 0.0, 1.0);
    s.read("track_noise", c.track_noise);
    read_wrap(s, c);
}

void read_img2vid(Reader& root, SceneConfig& c)
{
    if (!c.source) {
        invalid("source", "is required for method img2vid");
    }
    if (!c.flow_map) {
        invalid("flow_map", "is required for method img2vid");
    }
    if (auto s = section(root, "img2vid")) {
        read_img2img(*s, c);
        s->finish();
    }
}

void read_layers(Reader& root, const fs::path& base, SceneConfig& c)
{
    auto s = section(root, "layers");
    if (!s) {
        invalid("layers", "is required for method layers");
    }
    read_img2img(*s, c);
    const json& stack = s->require("stack");
    if (!stack.is_array() || stack.empty()) {
        invalid(s->key_path("stack"), "must be a non-empty array");
    }
    for (std::size_t i = 0; i < stack.size(); ++i) {
        Reader l(stack[i], s->key_path("stack") + "[" + std::to_string(i) + "]");
        LayerSpec spec;
        spec.seed = c.seed + i;
        for (const char* key : {"image", "alpha", "flow_map"}) {
            l.require(key);
        }
        l.read_path("image", base, spec.image);
        l.read_path("alpha", base, spec.alpha);
        l.read_path("flow_map", base, spec.flow_map);
        l.read("seed", spec.seed);
        l.finish();
        c.layers.push_back(spec);
    }
    s->finish();
}

std::vector<fs::path> list_dir(const fs::path& dir, const std::string& extension, const std::string& key)
{
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        invalid(key, "is not a directory: " + dir.string());
    }
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void read_path_list(Reader& s, const fs::path& base, const char* list_key, const char* dir_key,
                    const std::string& extension, std::vector<fs::path>& out)
{
    const json* list = s.find(list_key);
    fs::path dir;
    const bool has_dir = s.read_path(dir_key, base, dir);
    if ((list != nullptr) == has_dir) {
        invalid(s.key_path(list_key), std::string("exactly one of \"") + list_key + "\" and \"" + dir_key +
                                          "\" is required");
    }
    if (has_dir) {
        out = list_dir(dir, extension, s.key_path(dir_key));
        return;
    }
    if (!list->is_array()) {
        invalid(s.key_path(list_key), "must be an array of paths");
    }
    for (const json& item : *list) {
        if (!item.is_string() || item.get<std::string>().empty()) {
            invalid(s.key_path(list_key), "must be an array of paths");
        }
        const fs::path p(item.get<std::string>());
        out.push_back((p.is_absolute() ? p : base / p).lexically_normal());
    }
}

void read_vid2vid(Reader& root, const fs::path& base, SceneConfig& c, bool frames_given)
{
    auto s = section(root, "vid2vid");
    if (!s) {
        invalid("vid2vid", "is required for method vid2vid");
    }
    read_img2img(*s, c);
    read_path_list(*s, base, "inputs", "input_dir", ".png", c.inputs);
    read_path_list(*s, base, "flows", "flow_dir", ".flo", c.flows);
    s->finish();
    if (c.inputs.empty()) {
        invalid(s->key_path("inputs"), "names no frames");
    }
    if (c.flows.size() + 1 != c.inputs.size()) {
        invalid(s->key_path("flows"), "must list one flow per frame after the first (" +
                                          std::to_string(c.inputs.size() - 1) + "), got " +
                                          std::to_string(c.flows.size()));
    }
    if (!frames_given) {
        c.frames = static_cast<int>(c.inputs.size());
    } else if (static_cast<std::size_t>(c.frames) > c.inputs.size()) {
        invalid("frames", "exceeds the " + std::to_string(c.inputs.size()) + " input frames");
    }
}

void read_upscale(Reader& root, SceneConfig& c)
{
    if (!c.source) {
        invalid("source", "is required for method upscale");
    }
    auto s = section(root, "upscale");
    if (!s) {
        invalid("upscale", "is required for method upscale");
    }
    s->read("strength", c.strength, 0.0, 1.0);
    std::string placement;
    if (s->read("placement", placement)) {
        if (placement == "tracked") {
            c.placement = NoisePlacement::tracked;
        } else if (placement == "stamped") {
            c.placement = NoisePlacement::stamped;
        } else {
            invalid(s->key_path("placement"), "must be \"tracked\" or \"stamped\"");
        }
    }
    const json& windows = s->require("windows");
    if (!windows.is_array() || windows.empty()) {
        invalid(s->key_path("windows"), "must be a non-empty array of [x, y]");
    }
    for (const json& w : windows) {
        if (!w.is_array() || w.size() != 2 || !w[0].is_number_unsigned() || !w[1].is_number_unsigned()) {
            invalid(s->key_path("windows"), "must be a non-empty array of [x, y]");
        }
        c.windows.push_back(UpscaleWindow{w[0].get<std::size_t>(), w[1].get<std::size_t>()});
    }
    if (const json* tile = s->find("tile")) {
        if (!tile->is_array() || tile->size() != 2) {
            invalid(s->key_path("tile"), "must be [height, width] in latent cells");
        }
        c.tile = std::pair{positive_dim((*tile)[0], s->key_path("tile")), positive_dim((*tile)[1], s->key_path("tile"))};
    }
    s->finish();
}

void read_composite(Reader& root, const fs::path& base, SceneConfig& c)
{
    auto s = section(root, "composite");
    if (!s) {
        invalid("composite", "is required for method composite");
    }
    s->require("mask");
    s->read_path("mask", base, c.mask);
    s->read("fg_seed", c.fg_seed);
    s->read("bg_seed", c.bg_seed);
    s->read("combine", c.combine, 0.0, 1.0);
    s->finish();
}

std::set<std::string, std::less<>> allowed_keys(Method m)
{
    std::set<std::string, std::less<>> keys{"method", "prompt", "seed", "schedule", "backend"};
    switch (m) {
    case Method::crystal:
        keys.insert({"frames", "latent_shape", "segmap", "crystal"});
        break;
    case Method::liquid:
        keys.insert({"frames", "latent_shape", "segmap", "flow_map", "calibration", "liquid"});
        break;
    case Method::img2vid:
        keys.insert({"frames", "source", "flow_map", "calibration", "img2vid"});
        break;
    case Method::layers:
        keys.insert({"frames", "calibration", "layers"});
        break;
    case Method::vid2vid:
        keys.insert({"frames", "vid2vid"});
        break;
    case Method::upscale:
        keys.insert({"latent_shape", "source", "upscale"});
        break;
    case Method::composite:
        keys.insert({"latent_shape", "composite"});
        break;
    }
    return keys;
}

const std::set<std::string, std::less<>> kTopLevelKeys = {
    "method", "prompt",   "seed",     "frames",      "latent_shape", "schedule", "backend", "segmap",  "flow_map",
    "source", "calibration", "crystal", "liquid",     "img2vid",      "layers",   "vid2vid", "upscale", "composite",
};

std::string path_string(const fs::path& p)
{
    return fs::absolute(p).lexically_normal().string();
}

} // namespace

std::string_view to_string(Method m)
{
    for (const auto& [name, method] : kMethods) {
        if (method == m) {
            return name;
        }
    }
    return "?";
}

SceneConfig parse_scene_config(const json& j, const fs::path& base_dir)
{
    Reader root(j, "");
    SceneConfig c;
    std::string method;
    root.require("method");
    root.read("method", method);
    const auto it = kMethods.find(method);
    if (it == kMethods.end()) {
        invalid("method", "must be one of crystal, liquid, img2vid, layers, vid2vid, upscale, composite; got \"" +
                              method + "\"");
    }
    c.method = it->second;
    const auto allowed = allowed_keys(c.method);
    // Keys the method does not use are never consumed and so fail in finish().
    auto use = [&](std::string_view key) { return allowed.count(key) != 0; };

    root.read("prompt", c.prompt);
    root.read("seed", c.seed);
    bool frames_given = false;
    if (use("frames")) {
        frames_given = root.read("frames", c.frames, 1, 100000);
    }
    if (use("latent_shape")) {
        if (const json* shape = root.find("latent_shape")) {
            if (!shape->is_array() || shape->size() != 3) {
                invalid("latent_shape", "must be [C, H, W]");
            }
            c.latent_shape = Shape{positive_dim((*shape)[0], "latent_shape"), positive_dim((*shape)[1], "latent_shape"),
                                   positive_dim((*shape)[2], "latent_shape")};
        }
    }
    read_schedule(root, c);
    read_backend(root, c);
    if (use("segmap")) {
        root.read_path("segmap", base_dir, c.segmap);
    }
    if (use("flow_map")) {
        root.read_path("flow_map", base_dir, c.flow_map);
    }
    if (use("source")) {
        root.read_path("source", base_dir, c.source);
    }
    if (use("calibration")) {
        read_calibration(root, c);
    }

    switch (c.method) {
    case Method::crystal:
        read_crystal(root, base_dir, c);
        break;
    case Method::liquid:
        read_liquid(root, c);
        break;
    case Method::img2vid:
        read_img2vid(root, c);
        break;
    case Method::layers:
        read_layers(root, base_dir, c);
        break;
    case Method::vid2vid:
        read_vid2vid(root, base_dir, c, frames_given);
        break;
    case Method::upscale:
        read_upscale(root, c);
        break;
    case Method::composite:
        read_composite(root, base_dir, c);
        break;
    }
    root.finish(kTopLevelKeys, method);
    return c;
}

json read_config_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        fail(Errc::io, "cannot read config " + path.string());
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        fail(Errc::validation, "config: " + path.string() + " is not valid JSON");
    }
    return j;
}

json to_json(const SceneConfig& c)
{
    json j;
    j["method"] = std::string(to_string(c.method));
    j["prompt"] = c.prompt;
    j["seed"] = c.seed;
    j["schedule"] = {{"steps", c.schedule.steps}, {"switch", c.schedule.switch_fraction}};
    j["backend"] = {{"kind", c.backend.kind}};
    if (!c.backend.command.empty()) {
        j["backend"]["command"] = c.backend.command;
    }
    const auto allowed = allowed_keys(c.method);
    if (allowed.count("frames") != 0) {
        j["frames"] = c.frames;
    }
    if (c.latent_shape && allowed.count("latent_shape") != 0) {
        j["latent_shape"] = {c.latent_shape->channels, c.latent_shape->height, c.latent_shape->width};
    }
    if (c.segmap && allowed.count("segmap") != 0) {
        j["segmap"] = path_string(*c.segmap);
    }
    if (c.flow_map && allowed.count("flow_map") != 0) {
        j["flow_map"] = path_string(*c.flow_map);
    }
    if (c.source && allowed.count("source") != 0) {
        j["source"] = path_string(*c.source);
    }
    if (allowed.count("calibration") != 0) {
        j["calibration"] = {{"max_velocity", c.calibration.max_velocity},
                            {"max_amplitude", c.calibration.max_amplitude},
                            {"period_min", c.calibration.period_min},
                            {"period_max", c.calibration.period_max},
                            {"white_threshold", c.calibration.white_threshold}};
    }
    const json wrap = {{"wrap_x", c.wrap_x}, {"wrap_y", c.wrap_y}};
    switch (c.method) {
    case Method::crystal: {
        json s;
        s["shift"] = {{"dx", c.shift.dx}, {"dy", c.shift.dy}, {"wrap_x", c.shift.wrap_x}, {"wrap_y", c.shift.wrap_y}};
        if (c.shear) {
            s["shear"] = {{"horizon_row", c.shear->horizon_row},
                          {"near", c.shear->near},
                          {"far", c.shear->far},
                          {"wrap", c.shear->wrap}};
        }
        json pieces = json::array();
        for (const MosaicSpec& m : c.mosaic) {
            pieces.push_back({{"mask", path_string(m.mask)}, {"dx", m.dx}, {"dy", m.dy}, {"wrap", m.wrap}});
        }
        s["mosaic"] = std::move(pieces);
        j["crystal"] = std::move(s);
        break;
    }
    case Method::liquid: {
        json s = {{"beta", c.beta},
                  {"floor", c.floor},
                  {"inject_image", c.inject_image},
                  {"inject_latent", c.inject_latent}};
        if (c.kurtosis_delta) {
            s["kurtosis_delta"] = *c.kurtosis_delta;
        }
        s.update(wrap);
        j["liquid"] = std::move(s);
        break;
    }
    case Method::img2vid: {
        json s = {{"strength", c.strength}, {"track_noise", c.track_noise}};
        s.update(wrap);
        j["img2vid"] = std::move(s);
        break;
    }
    case Method::layers: {
        json s = {{"strength", c.strength}, {"track_noise", c.track_noise}};
        s.update(wrap);
        json stack = json::array();
        for (const LayerSpec& l : c.layers) {
            stack.push_back({{"image", path_string(l.image)},
                             {"alpha", path_string(l.alpha)},
                             {"flow_map", path_string(l.flow_map)},
                             {"seed", l.seed}});
        }
        s["stack"] = std::move(stack);
        j["layers"] = std::move(s);
        break;
    }
    case Method::vid2vid: {
        json s = {{"strength", c.strength}, {"track_noise", c.track_noise}};
        s.update(wrap);
        json inputs = json::array();
        for (const fs::path& p : c.inputs) {
            inputs.push_back(path_string(p));
        }
        json flows = json::array();
        for (const fs::path& p : c.flows) {
            flows.push_back(path_string(p));
        }
        s["inputs"] = std::move(inputs);
        s["flows"] = std::move(flows);
        j["vid2vid"] = std::move(s);
        break;
    }
    case Method::upscale: {
        json windows = json::array();
        for (const UpscaleWindow& w : c.windows) {
            windows.push_back({w.x, w.y});
        }
        json s = {{"strength", c.strength},
                  {"placement", c.placement == NoisePlacement::tracked ? "tracked" : "stamped"},
                  {"windows", std::move(windows)}};
        if (c.tile) {
            s["tile"] = {c.tile->first, c.tile->second};
        }
        j["upscale"] = std::move(s);
        break;
    }
    case Method::composite:
        j["composite"] = {{"mask", path_string(*c.mask)},
                          {"fg_seed", c.fg_seed},
                          {"bg_seed", c.bg_seed},
                          {"combine", c.combine}};
        break;
    }
    return j;
}

} // namespace noisecine::cli
