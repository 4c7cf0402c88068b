// dmfc: build, sample, condition and fit dynamic multi feature-class GP
// models of synthetic lollipop joints, and evaluate them.

#include "dmfc/io.hpp"
#include "dmfc/metrics.hpp"
#include "dmfc/model.hpp"
#include "dmfc/synthetic.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dmfc;

namespace {

constexpr const char* kVersion = "dmfc-gpm 1.0.0";

std::string default_data_dir() {
    if (const char* env = std::getenv("DMFC_DATA_DIR")) return env;
    return "data";
}

void print_summary(const json& j) {
    json out = j;
    out["version"] = kVersion;
    std::cout << out.dump() << std::endl;
}

json transform_json(const RigidTransform& t) {
    json r = json::array();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) r.push_back(t.rotation(i, k));
    return json{{"rotation_row_major", r},
                {"translation", {t.translation[0], t.translation[1], t.translation[2]}}};
}

std::string joint_dir_name(const std::string& group, int idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03d", group.c_str(), idx);
    return buf;
}

struct Dataset {
    ReferencePtr reference;
    std::vector<JointData> train;
};

Dataset load_dataset(const fs::path& root) {
    Dataset ds;
    const fs::path refdir = root / "reference";
    if (!fs::exists(refdir)) throw DataError("no reference directory under " + root.string());
    auto ref = std::make_shared<MultiObjectReference>();
    for (int j = 1;; ++j) {
        const fs::path tet = refdir / ("obj" + std::to_string(j) + "_tet.ply");
        if (!fs::exists(tet)) break;
        MultiObjectReference::Object obj;
        obj.name = "object" + std::to_string(j);
        obj.tetra = read_tet_mesh_ply(tet);
        obj.surface = read_tri_mesh_ply(refdir / ("obj" + std::to_string(j) + "_surface.ply"));
        ref->objects.push_back(std::move(obj));
    }
    ref->validate();
    ds.reference = ref;

    for (int i = 0;; ++i) {
        const fs::path dir = root / "train" / joint_dir_name("joint", i);
        if (!fs::exists(dir)) break;
        JointData d;
        for (Index j = 1; j <= ref->object_count(); ++j) {
            const TetMesh t = read_tet_mesh_ply(dir / ("obj" + std::to_string(j) + "_tet.ply"));
            d.vertices.push_back(t.vertices);
            d.intensity.push_back(t.intensity);
        }
        ds.train.push_back(std::move(d));
    }
    if (ds.train.empty()) throw DataError("no training joints under " + root.string());
    return ds;
}

std::vector<Volume3> load_volumes(const fs::path& root, const std::string& group) {
    std::vector<Volume3> out;
    for (int i = 0;; ++i) {
        const fs::path raw = root / group / joint_dir_name("joint", i) / "volume.f64";
        if (!fs::exists(raw)) break;
        out.push_back(read_volume(raw));
    }
    return out;
}

PoseMode parse_mode(const std::string& s) {
    if (s == "edr") return PoseMode::Edr;
    if (s == "sr") return PoseMode::Sr;
    if (s == "pdm") return PoseMode::Pdm;
    throw DataError("--mode must be edr, sr or pdm");
}

RankSpec parse_rank(const std::string& s) {
    if (s == "full") return RankSpec::full();
    if (s == "auto") return RankSpec::auto_fraction();
    try {
        return RankSpec::fixed(std::stol(s));
    } catch (const std::exception&) {
        throw DataError("--rank must be full, auto or an integer");
    }
}

DmfcGpm build_from_dir(const fs::path& data, PoseMode mode, const std::string& rank,
                       const std::string& weights, bool permute, double permute_threshold,
                       Index* n_out, Index* n_used) {
    const Dataset ds = load_dataset(data);
    TrainingSet ts = assemble_training_functions(ds.train, ds.reference);
    if (n_out) *n_out = ts.n();
    if (permute) {
        std::optional<double> thr;
        if (permute_threshold >= 0) thr = permute_threshold;
        ts = permute_poses(ts, thr);
    }
    if (n_used) *n_used = ts.n();
    std::optional<ClassWeights> w;
    if (!weights.empty()) {
        ClassWeights cw;
        if (std::sscanf(weights.c_str(), "%lf,%lf,%lf", &cw.shape, &cw.pose, &cw.intensity) != 3)
            throw DataError("--weights expects s,p,i");
        w = cw;
    }
    return build(ts, w, parse_rank(rank), mode);
}

void write_instance(const fs::path& dir, const JointInstance& inst, const VecX& theta) {
    fs::create_directories(dir);
    json meta;
    meta["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    meta["poses"] = json::array();
    meta["pose_angles_yz"] = json::array();
    for (size_t j = 0; j < inst.tetras.size(); ++j) {
        const std::string stem = "obj" + std::to_string(j + 1);
        write_tri_mesh_ply(dir / (stem + "_surface.ply"), inst.surfaces[j]);
        write_tet_mesh_ply(dir / (stem + "_tet.ply"), inst.tetras[j]);
        meta["poses"].push_back(transform_json(inst.poses[j]));
        meta["pose_angles_yz"].push_back(planar_angle_yz(inst.poses[j].rotation));
    }
    meta["version"] = kVersion;
    atomic_write_file(dir / "instance.json", meta.dump(2) + "\n");
}

VecX parse_theta(const std::string& csv) {
    std::vector<double> vals;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        vals.push_back(std::stod(tok));
    }
    VecX t(static_cast<Index>(vals.size()));
    for (size_t i = 0; i < vals.size(); ++i) t[static_cast<Index>(i)] = vals[i];
    return t;
}

double median(std::vector<double> v) {
    if (v.empty()) throw DataError("median of empty list");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int lollipop_resolution_of(const DmfcGpm& model) {
    for (int r = 0; r < 8; ++r)
        if (lollipop_head_vertex_count(r) + lollipop_stick_vertex_count(r) ==
            model.reference->objects[0].surface.vertex_count())
            return r;
    throw DataError("model reference is not a lollipop mesh");
}

// --- subcommands -----------------------------------------------------------

int cmd_gen_data(const std::string& out, const std::string& preset, int resolution,
                 double spacing, bool exact_intensity) {
    const fs::path root = out;
    std::vector<JointSpec> train_specs = paper_training_specs(resolution);
    if (preset == "tiny") {
        std::vector<JointSpec> reduced;
        for (size_t i = 0; i < train_specs.size(); i += 7) reduced.push_back(train_specs[i]);
        train_specs = reduced;
    } else if (preset != "paper") {
        throw DataError("--preset must be paper or tiny");
    }

    const auto ref_ptr = make_reference(resolution);
    {
        const fs::path refdir = root / "reference";
        fs::create_directories(refdir);
        for (Index j = 0; j < ref_ptr->object_count(); ++j) {
            const std::string stem = "obj" + std::to_string(j + 1);
            write_tri_mesh_ply(refdir / (stem + "_surface.ply"), ref_ptr->objects[j].surface);
            write_tet_mesh_ply(refdir / (stem + "_tet.ply"), ref_ptr->objects[j].tetra);
        }
    }

    json truth;
    truth["preset"] = preset;
    truth["resolution"] = resolution;
    truth["joints"] = json::array();

    auto emit = [&](const std::string& group, int idx, const JointSpec& spec,
                    const std::string& purpose) {
        SyntheticJoint joint = generate_joint(spec);
        double s = spacing > 0 ? spacing : default_spacing(joint);
        if (purpose == "recovery") s *= 0.5;  // reconstruction target: finer observation
        const Volume3 vol = render_volume(joint, s);
        if (!exact_intensity)
            for (size_t j = 0; j < joint.tetras.size(); ++j)
                joint.tetras[j].intensity = tet_intensity_correspondence(vol, joint.tetras[j]);
        const fs::path dir = root / group / joint_dir_name("joint", idx);
        fs::create_directories(dir);
        for (size_t j = 0; j < joint.tetras.size(); ++j) {
            const std::string stem = "obj" + std::to_string(j + 1);
            write_tri_mesh_ply(dir / (stem + "_surface.ply"), joint.surfaces[j]);
            write_tet_mesh_ply(dir / (stem + "_tet.ply"), joint.tetras[j]);
        }
        write_volume(dir / "volume.f64", vol);

        json rec;
        rec["group"] = group;
        rec["index"] = idx;
        rec["purpose"] = purpose;
        rec["r"] = {spec.r1, spec.r2, spec.r3};
        rec["theta"] = {spec.theta2, spec.theta3};
        rec["spacing"] = s;
        rec["poses"] = json::array();
        for (const auto& t : joint.pose) rec["poses"].push_back(transform_json(t));
        truth["joints"].push_back(rec);
    };

    int idx = 0;
    for (const auto& spec : train_specs) emit("train", idx++, spec, "training");

    int hidx = 0;
    for (const auto& spec : heldout_pose_specs(resolution))
        emit("heldout", hidx++, spec, "generality");
    // pose-recovery target at a known held-out angle
    JointSpec recovery;
    recovery.r1 = 7.5;
    recovery.r2 = 31.0 - 7.5;
    recovery.r3 = 17.0 - 7.5;
    recovery.theta2 = 0.45 * M_PI;
    recovery.theta3 = 0.35 * M_PI;
    recovery.resolution = resolution;
    emit("heldout", hidx++, recovery, "recovery");

    atomic_write_file(root / "ground_truth.json", truth.dump(2) + "\n");

    json manifest;
    manifest["preset"] = preset;
    manifest["resolution"] = resolution;
    manifest["train_joints"] = train_specs.size();
    manifest["heldout_joints"] = hidx;
    manifest["intensity"] = exact_intensity ? "analytic" : "volume-sampled";
    manifest["version"] = kVersion;
    atomic_write_file(root / "manifest.json", manifest.dump(2) + "\n");

    print_summary({{"command", "gen-data"},
                   {"out", root.string()},
                   {"train_joints", train_specs.size()},
                   {"heldout_joints", hidx}});
    return 0;
}

int cmd_build(const std::string& data, const std::string& out, const std::string& mode,
              const std::string& rank, const std::string& weights) {
    Index n = 0;
    const DmfcGpm model =
        build_from_dir(data, parse_mode(mode), rank, weights, false, -1, &n, nullptr);
    save_model(out, model, kVersion);
    const VecX ve = variance_explained(model);
    print_summary(
        {{"command", "build"},
         {"model", out},
         {"samples", n},
         {"rank", model.rank()},
         {"mode", mode},
         {"class_weights", {model.weights.shape, model.weights.pose, model.weights.intensity}},
         {"variance_explained",
          std::vector<double>(ve.data(), ve.data() + std::min<Index>(5, ve.size()))}});
    return 0;
}

int cmd_sample(const std::string& model_path, const std::string& theta_csv, long seed,
               const std::string& out_dir) {
    const DmfcGpm model = load_model(model_path);
    VecX theta;
    if (!theta_csv.empty()) {
        theta = parse_theta(theta_csv);
        if (theta.size() > model.rank())
            throw DataError("theta has more coefficients than the model rank");
    } else if (seed >= 0) {
        theta = random_sample(model, static_cast<std::uint64_t>(seed)).first;
    } else {
        theta = VecX::Zero(model.rank());
    }
    const JointInstance inst = sample(model, theta);
    write_instance(out_dir, inst, theta);
    print_summary({{"command", "sample"},
                   {"model", model_path},
                   {"out", out_dir},
                   {"coefficients", theta.size()}});
    return 0;
}

int cmd_marginalize(const std::string& model_path, const std::string& out,
                    const std::string& objects_csv, const std::string& classes_csv,
                    const std::string& points_file) {
    DmfcGpm model = load_model(model_path);
    if (objects_csv.empty() && classes_csv.empty() && points_file.empty())
        throw DataError("marginalize: need --objects, --classes or --points");
    json info;
    if (!objects_csv.empty() || !points_file.empty()) {
        std::vector<Index> ids;
        if (!points_file.empty()) {
            std::ifstream in(points_file);
            if (!in) throw DataError("cannot open " + points_file);
            json arr = json::parse(in);
            for (const auto& v : arr) ids.push_back(v.get<Index>());
        }
        if (!objects_csv.empty()) {
            std::stringstream ss(objects_csv);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                const Index j = std::stol(tok) - 1;
                if (j < 0 || j >= model.reference->object_count())
                    throw DataError("object index out of range: " + tok);
                const Index off = model.reference->object_offset(j);
                for (Index k = 0; k < model.reference->object_domain_size(j); ++k)
                    ids.push_back(off + k);
            }
        }
        model = marginalize_domain(model, ids);
        info["points"] = ids.size();
    }
    if (!classes_csv.empty()) {
        ClassSet cs;
        std::stringstream ss(classes_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok == "shape") cs.shape = true;
            else if (tok == "pose") cs.pose = true;
            else if (tok == "intensity") cs.intensity = true;
            else throw DataError("unknown feature class: " + tok);
        }
        model = marginalize_class(model, cs);
        info["classes"] = classes_csv;
    }
    save_model(out, model, kVersion);
    info["command"] = "marginalize";
    info["model"] = out;
    info["rank"] = model.rank();
    info["objects"] = model.reference->object_count();
    print_summary(info);
    return 0;
}

int cmd_posterior(const std::string& model_path, const std::string& obs_file, double sigma2,
                  const std::string& out) {
    const DmfcGpm model = load_model(model_path);
    std::ifstream in(obs_file);
    if (!in) throw DataError("cannot open " + obs_file);
    const json arr = json::parse(in, nullptr, true);
    std::vector<PointObservation> obs;
    for (const auto& rec : arr) {
        PointObservation o;
        o.point = rec.at("point").get<Index>();
        if (rec.contains("shape"))
            for (int c = 0; c < 3; ++c) {
                o.mask[c] = true;
                o.value[c] = rec["shape"].at(c).get<double>();
            }
        if (rec.contains("pose"))
            for (int c = 0; c < 3; ++c) {
                o.mask[3 + c] = true;
                o.value[3 + c] = rec["pose"].at(c).get<double>();
            }
        if (rec.contains("intensity")) {
            o.mask[6] = true;
            o.value[6] = rec["intensity"].get<double>();
        }
        obs.push_back(o);
    }
    const DmfcGpm post = posterior(model, obs, sigma2);
    save_model(out, post, kVersion);
    print_summary({{"command", "posterior"},
                   {"model", out},
                   {"observations", obs.size()},
                   {"sigma2", sigma2},
                   {"rank", post.rank()}});
    return 0;
}

int cmd_permute(const std::string& data, const std::string& out, double threshold,
                const std::string& mode, const std::string& rank, const std::string& weights) {
    Index n = 0, used = 0;
    const DmfcGpm model =
        build_from_dir(data, parse_mode(mode), rank, weights, true, threshold, &n, &used);
    save_model(out, model, kVersion);
    print_summary({{"command", "permute"},
                   {"model", out},
                   {"samples", n},
                   {"permuted_samples", used},
                   {"rank", model.rank()}});
    return 0;
}

int cmd_fit(const std::string& model_path, const std::string& volume_path,
            const std::string& surface_dir, double sigma, long iterations, long seed,
            long chains, const std::string& out_dir) {
    const DmfcGpm model = load_model(model_path);
    Observation obs;
    if (!volume_path.empty()) {
        const Volume3 vol = read_volume(volume_path);
        double s = sigma;
        if (s <= 0) {
            const double range = vol.voxels.maxCoeff() - vol.voxels.minCoeff();
            s = std::max(0.1 * range, 1e-9);
        }
        obs = Observation::from_volume(vol, s);
    } else if (!surface_dir.empty()) {
        std::vector<Points> targets;
        for (Index j = 1; j <= model.reference->object_count(); ++j) {
            const fs::path p =
                fs::path(surface_dir) / ("obj" + std::to_string(j) + "_surface.ply");
            if (fs::exists(p)) targets.push_back(read_tri_mesh_ply(p).vertices);
            else targets.emplace_back(3, 0);  // masked object
        }
        obs = Observation::from_surfaces(targets, sigma > 0 ? sigma : 1.0);
    } else {
        throw DataError("fit: either --volume or --surfaces is required");
    }

    const Chain chain = run_chains(model, obs, Proposal{}, iterations,
                                   static_cast<std::uint64_t>(seed), chains);
    if (chain.accepted.empty()) throw NumericalError("fit: chain accepted no state");
    const auto [theta, inst] = best_sample(model, chain);
    write_instance(out_dir, inst, theta);

    json report;
    report["command"] = "fit";
    report["iterations"] = chain.iterations;
    report["accepted"] = chain.accepted.size();
    report["acceptance_rates"] = json::array();
    for (size_t f = 0; f < chain.acceptance_counts.size(); ++f)
        report["acceptance_rates"].push_back(
            static_cast<double>(chain.acceptance_counts[f]) / chain.iterations);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& s : chain.accepted) best = std::max(best, s.log_prob);
    report["best_log_probability"] = best;
    report["sigma"] = obs.sigma;
    report["pose_angles_yz"] = json::array();
    for (const auto& t : inst.poses)
        report["pose_angles_yz"].push_back(planar_angle_yz(t.rotation));
    atomic_write_file(fs::path(out_dir) / "report.json", report.dump(2) + "\n");
    print_summary(report);
    return 0;
}

int cmd_eval_correlations(const std::string& model_path, long samples, long seed,
                          const std::string& data, const std::string& out_prefix) {
    const DmfcGpm model = load_model(model_path);
    if (model.reference->object_count() != 3)
        throw DataError("eval-correlations expects the three-object lollipop model");
    const auto landmarks = lollipop_landmarks(lollipop_resolution_of(model));

    const CorrelationTable table =
        correlation_report(model, samples, static_cast<std::uint64_t>(seed), landmarks);

    json out;
    out["command"] = "eval-correlations";
    out["samples"] = samples;
    const auto names = CorrelationTable::names();
    const auto vals = table.values();
    for (int k = 0; k < 6; ++k) out["model"][names[k]] = vals[k];

    std::ostringstream csv;
    csv << "pair,model";
    CorrelationTable train;
    bool have_train = false;
    if (!data.empty()) {
        const Dataset ds = load_dataset(data);
        const TrainingSet ts = assemble_training_functions(ds.train, ds.reference);
        train = training_correlations(ts, ds.train, landmarks);
        have_train = true;
        const auto tv = train.values();
        for (int k = 0; k < 6; ++k) out["training"][names[k]] = tv[k];
        csv << ",training";
    }
    csv << "\n";
    for (int k = 0; k < 6; ++k) {
        csv << names[k] << ',' << vals[k];
        if (have_train) csv << ',' << train.values()[k];
        csv << "\n";
    }
    if (!out_prefix.empty()) {
        atomic_write_file(out_prefix + ".json", out.dump(2) + "\n");
        atomic_write_file(out_prefix + ".csv", csv.str());
    }
    print_summary(out);
    return 0;
}

int cmd_eval_specgen(const std::string& model_path, const std::string& model_sr_path,
                     const std::string& data, long samples, long iterations, long chains,
                     long seed, const std::string& out_prefix) {
    const DmfcGpm model = load_model(model_path);
    const std::vector<Volume3> held_in = load_volumes(data, "train");
    const std::vector<Volume3> held_out = load_volumes(data, "heldout");
    if (held_in.empty()) throw DataError("eval-specgen: no training volumes under " + data);
    if (held_out.empty()) throw DataError("eval-specgen: no heldout volumes under " + data);

    GeneralityOptions opts;
    opts.iterations = iterations;
    opts.chains = chains;
    opts.seed = static_cast<std::uint64_t>(seed);

    json out;
    out["command"] = "eval-specgen";
    std::ostringstream csv;
    csv << "model,kind,object,value\n";

    auto emit = [&](const std::string& name, const DmfcGpm& m) {
        const auto spec = specificity(m, held_in, samples, static_cast<std::uint64_t>(seed));
        const auto gen = generality(m, held_out, opts);
        for (size_t j = 0; j < spec.size(); ++j) {
            out[name]["specificity_median"].push_back(median(spec[j]));
            out[name]["generality_median"].push_back(median(gen[j]));
            out[name]["generality"].push_back(gen[j]);
            for (double v : spec[j])
                csv << name << ",specificity," << (j + 1) << ',' << v << "\n";
            for (double v : gen[j]) csv << name << ",generality," << (j + 1) << ',' << v << "\n";
        }
    };
    emit("model", model);
    if (!model_sr_path.empty()) emit("model_sr", load_model(model_sr_path));

    if (!out_prefix.empty()) {
        atomic_write_file(out_prefix + ".json", out.dump(2) + "\n");
        atomic_write_file(out_prefix + ".csv", csv.str());
    }
    print_summary(out);
    return 0;
}

int cmd_project_drr(const std::string& volume_path, const std::string& axis,
                    const std::string& out_prefix, bool raw) {
    const Volume3 vol = read_volume(volume_path);
    int ax = -1;
    if (axis == "x") ax = 0;
    else if (axis == "y") ax = 1;
    else if (axis == "z") ax = 2;
    else throw DataError("axis must be x, y or z");
    const Image2 img = raw ? drr_raw(vol, ax) : drr_project(vol, ax);

    std::ostringstream csv;
    for (Index r = 0; r < img.pixels.rows(); ++r) {
        for (Index c = 0; c < img.pixels.cols(); ++c) {
            if (c) csv << ',';
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.10g", img.pixels(r, c));
            csv << buf;
        }
        csv << "\n";
    }
    atomic_write_file(out_prefix + ".csv", csv.str());
    json meta{{"nx", img.nx}, {"ny", img.ny}, {"axis", axis}, {"normalized", !raw}};
    atomic_write_file(out_prefix + ".json", meta.dump(2) + "\n");
    print_summary({{"command", "project-drr"},
                   {"out", out_prefix + ".csv"},
                   {"nx", img.nx},
                   {"ny", img.ny}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic multi feature-class Gaussian process models"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "Config file supplying any option (CLI overrides it)");
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic lollipop dataset");
    std::string gen_out = default_data_dir();
    std::string preset = "paper";
    int resolution = 1;
    double spacing = 0;
    bool exact_intensity = false;
    gen->add_option("--out", gen_out, "Dataset directory")->capture_default_str();
    gen->add_option("--preset", preset, "paper (60 joints) or tiny")->capture_default_str();
    gen->add_option("--resolution", resolution, "Mesh subdivision level")->capture_default_str();
    gen->add_option("--spacing", spacing, "Voxel spacing (default: longest axis / 64)");
    gen->add_flag("--exact-intensity", exact_intensity,
                  "Keep analytic intensities instead of sampling the rendered volume");

    auto* bld = app.add_subcommand("build", "Build a model from a dataset");
    std::string data = default_data_dir(), model_out = "model.dmfc", mode = "edr",
                rank = "full", weights;
    bld->add_option("--data", data, "Dataset directory")->capture_default_str();
    bld->add_option("--out", model_out, "Output model file")->capture_default_str();
    bld->add_option("--mode", mode, "Pose representation: edr, sr or pdm")->capture_default_str();
    bld->add_option("--rank", rank, "full, auto or an integer")->capture_default_str();
    bld->add_option("--weights", weights, "Class weights s,p,i (default: data-derived)");

    auto* smp = app.add_subcommand("sample", "Sample an instance from a model");
    std::string model_path = "model.dmfc", theta_csv, sample_out = "instance";
    long sample_seed = -1;
    smp->add_option("--model", model_path, "Model file")->capture_default_str();
    smp->add_option("--theta", theta_csv, "Comma-separated coefficients (default: zeros)");
    smp->add_option("--seed", sample_seed, "Draw random coefficients with this seed");
    smp->add_option("--out", sample_out, "Output directory")->capture_default_str();

    auto* mrg = app.add_subcommand("marginalize", "Restrict a model to objects/points/classes");
    std::string mrg_model = "model.dmfc", mrg_out = "marginal.dmfc", mrg_objects, mrg_classes,
                mrg_points;
    mrg->add_option("--model", mrg_model, "Model file")->capture_default_str();
    mrg->add_option("--out", mrg_out, "Output model file")->capture_default_str();
    mrg->add_option("--objects", mrg_objects, "Comma-separated 1-based object ids");
    mrg->add_option("--classes", mrg_classes, "Subset of shape,pose,intensity");
    mrg->add_option("--points", mrg_points, "JSON file with domain point ids");

    auto* pst = app.add_subcommand("posterior", "Condition a model on observations");
    std::string pst_model = "model.dmfc", pst_obs, pst_out = "posterior.dmfc";
    double sigma2 = 1.0;
    pst->add_option("--model", pst_model, "Model file")->capture_default_str();
    pst->add_option("--observations", pst_obs, "JSON observation list")->required();
    pst->add_option("--sigma2", sigma2, "Observation noise variance")->capture_default_str();
    pst->add_option("--out", pst_out, "Output model file")->capture_default_str();

    auto* prm = app.add_subcommand("permute", "Build a pose-permutation model");
    std::string prm_data = default_data_dir(), prm_out = "permuted.dmfc", prm_mode = "edr",
                prm_rank = "full", prm_weights;
    double prm_threshold = -1;
    prm->add_option("--data", prm_data, "Dataset directory")->capture_default_str();
    prm->add_option("--out", prm_out, "Output model file")->capture_default_str();
    prm->add_option("--threshold", prm_threshold,
                    "Shape-similarity threshold (RMS); negative = unconstrained");
    prm->add_option("--mode", prm_mode, "Pose representation")->capture_default_str();
    prm->add_option("--rank", prm_rank, "full, auto or an integer")->capture_default_str();
    prm->add_option("--weights", prm_weights, "Class weights s,p,i");

    auto* fit = app.add_subcommand("fit", "Metropolis-Hastings fit to an observation");
    std::string fit_model = "model.dmfc", fit_volume, fit_surfaces, fit_out = "fit";
    double fit_sigma = 0;
    long fit_iter = 5000, fit_seed = 0, fit_chains = 1;
    fit->add_option("--model", fit_model, "Model file")->capture_default_str();
    fit->add_option("--volume", fit_volume, "Target volume (.f64 with JSON sidecar)");
    fit->add_option("--surfaces", fit_surfaces, "Directory with objN_surface.ply targets");
    fit->add_option("--sigma", fit_sigma,
                    "Likelihood scale (default: 10% of the observed dynamic range)");
    fit->add_option("--iterations", fit_iter, "Chain length")->capture_default_str();
    fit->add_option("--seed", fit_seed, "Random seed")->capture_default_str();
    fit->add_option("--chains", fit_chains, "Independent chains")->capture_default_str();
    fit->add_option("--out", fit_out, "Output directory")->capture_default_str();

    auto* evc = app.add_subcommand("eval-correlations", "Correlation table from model samples");
    std::string evc_model = "model.dmfc", evc_data, evc_out;
    long evc_samples = 100, evc_seed = 0;
    evc->add_option("--model", evc_model, "Model file")->capture_default_str();
    evc->add_option("--samples", evc_samples, "Random samples")->capture_default_str();
    evc->add_option("--seed", evc_seed, "Random seed")->capture_default_str();
    evc->add_option("--data", evc_data, "Dataset directory (adds the training row)");
    evc->add_option("--out-prefix", evc_out, "Write <prefix>.json and <prefix>.csv");

    auto* evs = app.add_subcommand("eval-specgen", "Specificity and generality evaluation");
    std::string evs_model = "model.dmfc", evs_model_sr, evs_data = default_data_dir(), evs_out;
    long evs_samples = 50, evs_iter = 1500, evs_chains = 1, evs_seed = 0;
    evs->add_option("--model", evs_model, "Model file")->capture_default_str();
    evs->add_option("--model-sr", evs_model_sr, "Second model for comparison (e.g. SR mode)");
    evs->add_option("--data", evs_data, "Dataset directory")->capture_default_str();
    evs->add_option("--samples", evs_samples, "Specificity sample count")->capture_default_str();
    evs->add_option("--iterations", evs_iter, "Fit iterations per heldout volume")
        ->capture_default_str();
    evs->add_option("--chains", evs_chains, "Chains per fit")->capture_default_str();
    evs->add_option("--seed", evs_seed, "Random seed")->capture_default_str();
    evs->add_option("--out-prefix", evs_out, "Write <prefix>.json and <prefix>.csv");

    auto* drr = app.add_subcommand("project-drr", "Orthographic DRR projection of a volume");
    std::string drr_volume, drr_axis = "x", drr_out = "drr";
    bool drr_raw_flag = false;
    drr->add_option("--volume", drr_volume, "Volume file (.f64)")->required();
    drr->add_option("--axis", drr_axis, "Projection axis x|y|z")->capture_default_str();
    drr->add_option("--out-prefix", drr_out, "Output prefix")->capture_default_str();
    drr->add_flag("--raw", drr_raw_flag, "Skip [0,1] normalization");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << nlohmann::json{{"error", e.what()}, {"type", "usage"}}.dump() << std::endl;
        return 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(gen_out, preset, resolution, spacing, exact_intensity);
        if (bld->parsed()) return cmd_build(data, model_out, mode, rank, weights);
        if (smp->parsed()) return cmd_sample(model_path, theta_csv, sample_seed, sample_out);
        if (mrg->parsed())
            return cmd_marginalize(mrg_model, mrg_out, mrg_objects, mrg_classes, mrg_points);
        if (pst->parsed()) return cmd_posterior(pst_model, pst_obs, sigma2, pst_out);
        if (prm->parsed())
            return cmd_permute(prm_data, prm_out, prm_threshold, prm_mode, prm_rank, prm_weights);
        if (fit->parsed())
            return cmd_fit(fit_model, fit_volume, fit_surfaces, fit_sigma, fit_iter, fit_seed,
                           fit_chains, fit_out);
        if (evc->parsed())
            return cmd_eval_correlations(evc_model, evc_samples, evc_seed, evc_data, evc_out);
        if (evs->parsed())
            return cmd_eval_specgen(evs_model, evs_model_sr, evs_data, evs_samples, evs_iter,
                                    evs_chains, evs_seed, evs_out);
        if (drr->parsed()) return cmd_project_drr(drr_volume, drr_axis, drr_out, drr_raw_flag);
    } catch (const DataError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"type", "data"}}.dump() << std::endl;
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"type", "numerical"}}.dump()
                  << std::endl;
        return 4;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"type", "data"}}.dump() << std::endl;
        return 3;
    }
    return 0;
}
