#include "aulmpm/scene.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace aulmpm {

using nlohmann::json;

SolverMode parse_solver_mode(std::string_view name)
{
    if (name == "total_lagrangian" || name == "tl")
        return SolverMode::total_lagrangian;
    if (name == "eulerian" || name == "euler")
        return SolverMode::eulerian;
    if (name == "adaptive")
        return SolverMode::adaptive;
    throw ConfigurationError("unknown solver mode '" + std::string(name) + "'");
}

std::string_view to_string(SolverMode mode)
{
    switch (mode) {
    case SolverMode::total_lagrangian:
        return "total_lagrangian";
    case SolverMode::eulerian:
        return "eulerian";
    default:
        return "adaptive";
    }
}

Integrator parse_integrator(std::string_view name)
{
    if (name == "explicit")
        return Integrator::explicit_euler;
    if (name == "implicit" || name == "semi_implicit")
        return Integrator::semi_implicit;
    throw ConfigurationError("unknown integrator '" + std::string(name) + "'");
}

std::string_view to_string(Integrator integrator)
{
    return integrator == Integrator::explicit_euler ? "explicit" : "semi_implicit";
}

void SolverConfig::validate() const
{
    policy.validate();
    if (!(dt > 0.0))
        throw ValidationError("solver.dt must be positive");
    if (cfl < 0.0 || cfl > 1.0)
        throw ValidationError("solver.cfl must lie in (0, 1], or 0 for a fixed time step");
    if (!(frame_dt > 0.0))
        throw ValidationError("solver.frame_dt must be positive");
    if (end_time < 0.0)
        throw ValidationError("solver.end_time must be non-negative");
    if (flip_blend < 0.0 || flip_blend > 1.0)
        throw ValidationError("solver.flip_blend must lie in [0, 1]");
}

namespace {

// Object view that records which keys were read so leftovers can be rejected.
class Node {
public:
    Node(const json& value, std::string path) : value_(value), path_(std::move(path))
    {
        if (!value_.is_object())
            throw ParseError(path_ + ": expected an object");
    }

    const std::string& path() const { return path_; }

    bool has(const std::string& key) const { return value_.contains(key); }

    const json& at(const std::string& key)
    {
        seen_.insert(key);
        auto it = value_.find(key);
        if (it == value_.end())
            throw ParseError(path_ + "." + key + ": required key missing");
        return *it;
    }

    double number(const std::string& key)
    {
        const auto& v = at(key);
        if (!v.is_number())
            throw ParseError(path_ + "." + key + ": expected a number");
        return v.get<double>();
    }

    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    std::int64_t integer(const std::string& key, std::int64_t fallback)
    {
        if (!has(key))
            return fallback;
        const auto& v = at(key);
        if (!v.is_number_integer())
            throw ParseError(path_ + "." + key + ": expected an integer");
        return v.get<std::int64_t>();
    }

    bool boolean(const std::string& key, bool fallback)
    {
        if (!has(key))
            return fallback;
        const auto& v = at(key);
        if (!v.is_boolean())
            throw ParseError(path_ + "." + key + ": expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key)
    {
        const auto& v = at(key);
        if (!v.is_string())
            throw ParseError(path_ + "." + key + ": expected a string");
        return v.get<std::string>();
    }

    std::string string(const std::string& key, const std::string& fallback)
    {
        return has(key) ? string(key) : fallback;
    }

    template <int Dim>
    Vec<Dim> vec(const std::string& key)
    {
        const auto& v = at(key);
        const std::string where = path_ + "." + key;
        if (!v.is_array() || v.size() != static_cast<std::size_t>(Dim))
            throw ParseError(where + ": expected an array of " + std::to_string(Dim) + " numbers");
        Vec<Dim> out;
        for (int d = 0; d < Dim; ++d) {
            if (!v[static_cast<std::size_t>(d)].is_number())
                throw ParseError(where + "[" + std::to_string(d) + "]: expected a number");
            out[d] = v[static_cast<std::size_t>(d)].get<double>();
        }
        return out;
    }

    template <int Dim>
    Vec<Dim> vec(const std::string& key, const Vec<Dim>& fallback)
    {
        return has(key) ? vec<Dim>(key) : fallback;
    }

    void finish() const
    {
        for (auto it = value_.begin(); it != value_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ParseError(path_ + "." + it.key() + ": unknown key");
    }

private:
    const json& value_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class Fn>
auto with_path(const std::string& path, Fn&& fn)
{
    try {
        return fn();
    } catch (const ConfigurationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

template <int Dim>
struct Shape {
    enum Kind { box, ball } kind = box;
    Vec<Dim> lo = Vec<Dim>::Zero();
    Vec<Dim> hi = Vec<Dim>::Zero();
    Vec<Dim> center = Vec<Dim>::Zero();
    double radius = 0.0;

    bool contains(const Vec<Dim>& x) const
    {
        if (kind == box)
            return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
        return (x - center).squaredNorm() <= radius * radius;
    }

    double volume() const
    {
        if (kind == box)
            return (hi - lo).prod();
        return Dim == 2 ? std::numbers::pi * radius * radius : 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
    }
};

template <int Dim>
Shape<Dim> parse_shape(Node& obj)
{
    Node node(obj.at("shape"), obj.path() + ".shape");
    Shape<Dim> s;
    const std::string type = node.string("type");
    if (type == "box") {
        s.kind = Shape<Dim>::box;
        s.lo = node.vec<Dim>("min");
        s.hi = node.vec<Dim>("max");
        if (!((s.hi - s.lo).array() > 0.0).all())
            throw ValidationError(node.path() + ": max must exceed min on every axis");
        s.center = 0.5 * (s.lo + s.hi);
    } else if (type == "sphere") {
        s.kind = Shape<Dim>::ball;
        s.center = node.vec<Dim>("center");
        s.radius = node.number("radius");
        if (!(s.radius > 0.0))
            throw ValidationError(node.path() + ".radius: must be positive");
        s.lo = s.center.array() - s.radius;
        s.hi = s.center.array() + s.radius;
    } else {
        throw ValidationError(node.path() + ".type: unknown shape '" + type + "'");
    }
    node.finish();
    return s;
}

MaterialModel parse_material(Node& obj)
{
    Node node(obj.at("material"), obj.path() + ".material");
    const std::string kind_name = node.string("kind");
    const MaterialKind kind = with_path(node.path() + ".kind", [&] { return parse_material_kind(kind_name); });
    const double density = node.number("density");
    MaterialModel m;
    if (kind == MaterialKind::weakly_compressible_fluid) {
        m.kind = kind;
        m.bulk = node.number("bulk");
        m.gamma = node.number("gamma", m.gamma);
        m.rho0 = density;
    } else {
        m = with_path(node.path(), [&] {
            return MaterialModel::from_young(kind, node.number("youngs"), node.number("poisson"), density);
        });
        if (kind == MaterialKind::snow) {
            m.theta_c = node.number("theta_c", m.theta_c);
            m.theta_s = node.number("theta_s", m.theta_s);
            m.hardening = node.number("hardening", m.hardening);
        }
    }
    node.finish();
    with_path(node.path(), [&] {
        m.validate();
        return 0;
    });
    return m;
}

template <int Dim>
Collider<Dim> parse_collider(const json& value, const std::string& path)
{
    Node node(value, path);
    Collider<Dim> c;
    const std::string type = node.string("type");
    if (type == "half_space") {
        c.shape = ColliderShape::half_space;
        c.point = node.vec<Dim>("point");
        c.normal = node.vec<Dim>("normal");
        if (!(c.normal.norm() > 0.0))
            throw ValidationError(path + ".normal: must be non-zero");
        c.normal.normalize();
    } else if (type == "sphere") {
        c.shape = ColliderShape::sphere;
        c.point = node.vec<Dim>("center");
        c.radius = node.number("radius");
        c.inverted = node.boolean("inverted", false);
        if (!(c.radius > 0.0))
            throw ValidationError(path + ".radius: must be positive");
    } else {
        throw ValidationError(path + ".type: unknown collider '" + type + "'");
    }
    const std::string boundary = node.string("boundary", "sticky");
    c.type = with_path(path + ".boundary", [&] { return parse_boundary_type(boundary); });
    c.velocity = node.vec<Dim>("velocity", Vec<Dim>::Zero());
    node.finish();
    return c;
}

SolverConfig parse_solver(const json& value)
{
    Node node(value, "solver");
    SolverConfig s;
    auto enum_field = [&](const std::string& key, auto parse, auto fallback) {
        if (!node.has(key))
            return fallback;
        const std::string name = node.string(key);
        return with_path("solver." + key, [&] { return parse(name); });
    };
    s.mode = enum_field("mode", parse_solver_mode, s.mode);
    s.integrator = enum_field("integrator", parse_integrator, s.integrator);
    s.transfer = enum_field("transfer", parse_transfer, s.transfer);
    s.policy.epsilon = node.number("epsilon", s.policy.epsilon);
    s.policy.eta = node.number("eta", s.policy.eta);
    s.dt = node.number("dt", s.dt);
    s.cfl = node.number("cfl", s.cfl);
    s.frame_dt = node.number("frame_dt", s.frame_dt);
    s.end_time = node.number("end_time", s.end_time);
    s.flip_blend = node.number("flip_blend", s.flip_blend);
    s.strict_determinism = node.boolean("strict_determinism", s.strict_determinism);
    node.finish();
    try {
        s.validate();
    } catch (const ConfigurationError& e) {
        throw ValidationError(std::string("solver: ") + e.what());
    }
    return s;
}

// Lattice sites at cell centres of spacing h over the bounding box, each
// displaced uniformly within +-jitter*h/2.
template <int Dim>
std::vector<Vec<Dim>> sample_lattice(const Shape<Dim>& shape, double h, double jitter, std::mt19937_64& rng)
{
    NodeIndex<Dim> counts;
    for (int d = 0; d < Dim; ++d)
        counts[d] = std::max(1, static_cast<int>(std::floor((shape.hi[d] - shape.lo[d]) / h + 1e-9)));
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    std::vector<Vec<Dim>> out;
    NodeIndex<Dim> k = NodeIndex<Dim>::Zero();
    const std::int64_t total = counts.template cast<std::int64_t>().prod();
    for (std::int64_t n = 0; n < total; ++n) {
        Vec<Dim> x;
        for (int d = 0; d < Dim; ++d) {
            const double slack = (shape.hi[d] - shape.lo[d]) - counts[d] * h;
            x[d] = shape.lo[d] + 0.5 * slack + (k[d] + 0.5) * h;
        }
        Vec<Dim> offset;
        for (int d = 0; d < Dim; ++d)
            offset[d] = jitter * h * unit(rng);
        if (shape.contains(x))
            out.push_back(x + offset);
        for (int d = 0; d < Dim; ++d) {
            if (++k[d] < counts[d])
                break;
            k[d] = 0;
        }
    }
    return out;
}

// `count` points uniformly distributed in the shape by rejection.
template <int Dim>
std::vector<Vec<Dim>> sample_count(const Shape<Dim>& shape, std::int64_t count, std::mt19937_64& rng)
{
    std::vector<std::uniform_real_distribution<double>> axis;
    for (int d = 0; d < Dim; ++d)
        axis.emplace_back(shape.lo[d], shape.hi[d]);
    std::vector<Vec<Dim>> out;
    out.reserve(static_cast<std::size_t>(count));
    while (static_cast<std::int64_t>(out.size()) < count) {
        Vec<Dim> x;
        for (int d = 0; d < Dim; ++d)
            x[d] = axis[static_cast<std::size_t>(d)](rng);
        if (shape.contains(x))
            out.push_back(x);
    }
    return out;
}

// Angular velocity: a scalar in 2D, a vector in 3D.
template <int Dim>
Vec<Dim> rigid_velocity(Node& obj, const Vec<Dim>& linear, const Vec<Dim>& center, const Vec<Dim>& x)
{
    if (!obj.has("angular_velocity"))
        return linear;
    const Vec<Dim> r = x - center;
    if constexpr (Dim == 2) {
        const double w = obj.number("angular_velocity");
        return linear + Vec<Dim>(-w * r.y(), w * r.x());
    } else {
        const Vec<3> w = obj.vec<3>("angular_velocity");
        return linear + w.cross(r);
    }
}

} // namespace

int scene_dimension(const json& doc)
{
    if (!doc.is_object() || !doc.contains("grid") || !doc["grid"].is_object() || !doc["grid"].contains("origin")
        || !doc["grid"]["origin"].is_array())
        throw ParseError("grid.origin: required array missing");
    const auto n = doc["grid"]["origin"].size();
    if (n != 2 && n != 3)
        throw ParseError("grid.origin: expected 2 or 3 components");
    return static_cast<int>(n);
}

template <int Dim>
Scene<Dim> load_scene(const json& doc, const SceneOverrides& overrides)
{
    if (scene_dimension(doc) != Dim)
        throw ParseError("grid.origin: dimension does not match the requested solver");
    Node root(doc, "scene");
    Scene<Dim> scene;

    {
        Node grid(root.at("grid"), "grid");
        scene.grid.origin = grid.vec<Dim>("origin");
        scene.domain_size = grid.number("size");
        const auto res = grid.integer("resolution", 0);
        scene.resolution = static_cast<int>(overrides.resolution.value_or(static_cast<int>(res)));
        const std::string kernel = grid.string("kernel", "quadratic");
        scene.kernel = with_path("grid.kernel", [&] { return parse_kernel_order(kernel); });
        grid.finish();
        if (!(scene.domain_size > 0.0))
            throw ValidationError("grid.size: must be positive");
        if (scene.resolution < 4)
            throw ValidationError("grid.resolution: at least 4 cells per axis are required");
        scene.grid.dx = scene.domain_size / scene.resolution;
        scene.grid.cells.setConstant(scene.resolution);
    }

    scene.gravity = root.vec<Dim>("gravity");
    scene.solver = parse_solver(root.at("solver"));
    if (overrides.mode)
        scene.solver.mode = *overrides.mode;
    if (overrides.integrator)
        scene.solver.integrator = *overrides.integrator;
    if (overrides.transfer)
        scene.solver.transfer = *overrides.transfer;
    if (overrides.strict_determinism)
        scene.solver.strict_determinism = *overrides.strict_determinism;

    const auto& colliders = root.at("colliders");
    if (!colliders.is_array())
        throw ParseError("colliders: expected an array");
    for (std::size_t i = 0; i < colliders.size(); ++i)
        scene.colliders.push_back(parse_collider<Dim>(colliders[i], "colliders[" + std::to_string(i) + "]"));

    const auto& objects = root.at("objects");
    if (!objects.is_array() || objects.empty())
        throw ParseError("objects: expected a non-empty array");
    for (std::size_t i = 0; i < objects.size(); ++i) {
        Node obj(objects[i], "objects[" + std::to_string(i) + "]");
        ObjectRange range;
        range.name = obj.string("name", "object" + std::to_string(i));
        const auto shape = parse_shape<Dim>(obj);
        const auto material = parse_material(obj);
        const auto seed = obj.integer("seed", 0);
        const double jitter = obj.number("jitter", 0.0);
        if (jitter < 0.0 || jitter > 1.0)
            throw ValidationError(obj.path() + ".jitter: must lie in [0, 1]");
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed));

        std::vector<Vec<Dim>> positions;
        double volume = 0.0;
        if (obj.has("count")) {
            if (obj.has("spacing"))
                throw ParseError(obj.path() + ": give either spacing or count, not both");
            const auto count = obj.integer("count", 0);
            if (count <= 0)
                throw ValidationError(obj.path() + ".count: must be positive");
            positions = sample_count<Dim>(shape, count, rng);
            volume = shape.volume() / static_cast<double>(count);
            range.spacing = std::pow(volume, 1.0 / Dim);
        } else {
            range.spacing = obj.number("spacing");
            if (!(range.spacing > 0.0))
                throw ValidationError(obj.path() + ".spacing: must be positive");
            positions = sample_lattice<Dim>(shape, range.spacing, jitter, rng);
            volume = std::pow(range.spacing, Dim);
        }
        if (range.spacing > scene.grid.dx * (1.0 + 1e-3))
            throw ValidationError(obj.path() + ": particle spacing " + std::to_string(range.spacing)
                                  + " exceeds the grid spacing " + std::to_string(scene.grid.dx));
        if ((shape.lo.array() < scene.grid.origin.array()).any()
            || (shape.hi.array() > scene.grid.upper().array()).any())
            throw ValidationError(obj.path() + ": object lies outside the grid bounds");

        const Vec<Dim> linear = obj.vec<Dim>("velocity", Vec<Dim>::Zero());
        const Vec<Dim> center = obj.vec<Dim>("rotation_center", shape.center);
        std::vector<Vec<Dim>> velocities;
        velocities.reserve(positions.size());
        for (const auto& x : positions)
            velocities.push_back(rigid_velocity<Dim>(obj, linear, center, x));
        obj.finish();

        range.begin = scene.particles.size();
        const int material_index = static_cast<int>(scene.materials.size());
        scene.materials.push_back(material);
        const double density = material.rho0;
        for (std::size_t k = 0; k < positions.size(); ++k) {
            Particle<Dim> p;
            p.position = p.initial_position = positions[k];
            p.velocity = velocities[k];
            p.volume0 = volume;
            p.mass = density * volume;
            p.material = material_index;
            p.object = static_cast<int>(i);
            p.id = static_cast<std::int64_t>(scene.particles.size());
            try {
                build_stencil<Dim>(p.position, scene.grid, scene.kernel);
            } catch (const OutOfDomainError&) {
                throw ValidationError(obj.path() + ": particle " + std::to_string(k)
                                      + " is too close to the grid boundary for the kernel support");
            }
            scene.particles.push_back(p);
        }
        range.end = scene.particles.size();
        if (range.begin == range.end)
            throw ValidationError(obj.path() + ": sampler produced no particles");
        scene.objects.push_back(range);
    }
    root.finish();
    return scene;
}

json read_scene_document(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open scene file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

template Scene<2> load_scene<2>(const json&, const SceneOverrides&);
template Scene<3> load_scene<3>(const json&, const SceneOverrides&);

} // namespace aulmpm
