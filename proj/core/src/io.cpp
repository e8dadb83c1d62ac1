#include "gradepred/io.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace gradepred {

namespace {

std::vector<std::string> tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string token;
    while (in >> token) out.push_back(token);
    return out;
}

double need_double(const std::string& text, const std::string& what) {
    auto value = parse_double(text);
    if (!value) throw DataError("bad " + what + ": '" + text + "'");
    return *value;
}

int need_int(const std::string& text, const std::string& what) {
    const double value = need_double(text, what);
    if (value != static_cast<int>(value)) throw DataError(what + " must be an integer: " + text);
    return static_cast<int>(value);
}

void expect_magic(std::istream& in, const std::string& magic) {
    std::string line;
    if (!std::getline(in, line) || line != magic)
        throw DataError("expected '" + magic + "' header, got '" + line + "'");
}

} // namespace

void save_dataset(std::ostream& out, const CourseDataset& ds) {
    out << "# gradepred dataset v1\n";
    out << "target_course " << ds.target_course << '\n';
    out << "k " << ds.k << '\n';
    out << "centered " << (ds.centering ? 1 : 0) << '\n';
    out << "rows " << ds.design.rows() << '\n';
    out << "cols " << ds.design.cols() << '\n';
    for (int r = 0; r < ds.design.rows(); ++r) {
        out << "row " << ds.design.row_ids().name(r) << ' '
            << format_double(ds.targets[static_cast<std::size_t>(r)]);
        if (ds.centering) out << ' ' << format_double((*ds.centering)[static_cast<std::size_t>(r)]);
        out << '\n';
    }
    for (int c = 0; c < ds.design.cols(); ++c) out << "col " << ds.design.col_ids().name(c) << '\n';
    for (const auto& e : ds.design.entries())
        out << "e " << e.row << ' ' << e.col << ' ' << format_double(e.value) << '\n';
}

CourseDataset load_dataset(std::istream& in) {
    expect_magic(in, "# gradepred dataset v1");
    CourseDataset ds;
    IndexMap rows, cols;
    std::vector<SparseGradeMatrix::Entry> entries;
    std::vector<double> gpa;
    bool centered = false;
    int n_rows = 0, n_cols = 0;

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto t = tokens(line);
        if (t[0] == "target_course" && t.size() == 2) ds.target_course = t[1];
        else if (t[0] == "k" && t.size() == 2) ds.k = need_int(t[1], "k");
        else if (t[0] == "centered" && t.size() == 2) centered = need_int(t[1], "centered") != 0;
        else if (t[0] == "rows" && t.size() == 2) n_rows = need_int(t[1], "rows");
        else if (t[0] == "cols" && t.size() == 2) n_cols = need_int(t[1], "cols");
        else if (t[0] == "row" && t.size() >= 3) {
            rows.add(t[1]);
            ds.targets.push_back(need_double(t[2], "target"));
            if (centered) {
                if (t.size() != 4) throw DataError("centered row line needs a gpa: " + line);
                gpa.push_back(need_double(t[3], "gpa"));
            }
        } else if (t[0] == "col" && t.size() == 2) cols.add(t[1]);
        else if (t[0] == "e" && t.size() == 4)
            entries.push_back({need_int(t[1], "row index"), need_int(t[2], "col index"),
                               need_double(t[3], "value")});
        else throw DataError("unrecognized dataset line: " + line);
    }
    if (rows.size() != n_rows || cols.size() != n_cols)
        throw DataError("dataset header counts do not match the row/col lines");
    ds.design = SparseGradeMatrix(std::move(rows), std::move(cols), std::move(entries),
                                  /*check_grade_range=*/!centered);
    if (centered) ds.centering = std::move(gpa);
    return ds;
}

void save_linear_model(std::ostream& out, const LinearModel& model) {
    out << "# gradepred model v1\n";
    out << "kind linear\n";
    out << "nonneg " << (model.nonneg ? 1 : 0) << '\n';
    out << "lambda1 " << format_double(model.lambda1) << '\n';
    out << "lambda2 " << format_double(model.lambda2) << '\n';
    out << "bias " << format_double(model.bias) << '\n';
    for (const auto& [course, weight] : model.weights)
        out << "w " << course << ' ' << format_double(weight) << '\n';
}

LinearModel load_linear_model(std::istream& in) {
    expect_magic(in, "# gradepred model v1");
    LinearModel model;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto t = tokens(line);
        if (t[0] == "kind" && t.size() == 2) {
            if (t[1] != "linear") throw DataError("expected a linear model, got kind " + t[1]);
        } else if (t[0] == "nonneg" && t.size() == 2) model.nonneg = need_int(t[1], "nonneg") != 0;
        else if (t[0] == "lambda1" && t.size() == 2) model.lambda1 = need_double(t[1], "lambda1");
        else if (t[0] == "lambda2" && t.size() == 2) model.lambda2 = need_double(t[1], "lambda2");
        else if (t[0] == "bias" && t.size() == 2) model.bias = need_double(t[1], "bias");
        else if (t[0] == "w" && t.size() == 3)
            model.weights.emplace(t[1], need_double(t[2], "weight"));
        else throw DataError("unrecognized model line: " + line);
    }
    return model;
}

void save_mf_model(std::ostream& out, const MfModel& model) {
    out << "# gradepred model v1\n";
    out << "kind mf\n";
    out << "latent_dim " << model.latent_dim << '\n';
    out << "lambda " << format_double(model.lambda) << '\n';
    out << "use_global_bias " << (model.use_global_bias ? 1 : 0) << '\n';
    out << "seed " << model.seed << '\n';
    out << "mu " << format_double(model.mu) << '\n';
    for (int i = 0; i < model.students.size(); ++i) {
        out << "s " << model.students.name(i) << ' '
            << format_double(model.student_bias[static_cast<std::size_t>(i)]);
        for (int f = 0; f < model.latent_dim; ++f) out << ' ' << format_double(model.p(i, f));
        out << '\n';
    }
    for (int j = 0; j < model.courses.size(); ++j) {
        out << "c " << model.courses.name(j) << ' '
            << format_double(model.course_bias[static_cast<std::size_t>(j)]);
        for (int f = 0; f < model.latent_dim; ++f) out << ' ' << format_double(model.q(j, f));
        out << '\n';
    }
}

MfModel load_mf_model(std::istream& in) {
    expect_magic(in, "# gradepred model v1");
    MfModel model;
    std::vector<std::vector<double>> p_rows, q_rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto t = tokens(line);
        if (t[0] == "kind" && t.size() == 2) {
            if (t[1] != "mf") throw DataError("expected an mf model, got kind " + t[1]);
        } else if (t[0] == "latent_dim" && t.size() == 2)
            model.latent_dim = need_int(t[1], "latent_dim");
        else if (t[0] == "lambda" && t.size() == 2) model.lambda = need_double(t[1], "lambda");
        else if (t[0] == "use_global_bias" && t.size() == 2)
            model.use_global_bias = need_int(t[1], "use_global_bias") != 0;
        else if (t[0] == "seed" && t.size() == 2)
            model.seed = static_cast<std::uint64_t>(std::stoull(t[1]));
        else if (t[0] == "mu" && t.size() == 2) model.mu = need_double(t[1], "mu");
        else if ((t[0] == "s" || t[0] == "c") && t.size() >= 3) {
            if (static_cast<int>(t.size()) != 3 + model.latent_dim)
                throw DataError("factor line has wrong arity: " + line);
            std::vector<double> factors;
            for (std::size_t i = 3; i < t.size(); ++i)
                factors.push_back(need_double(t[i], "factor"));
            if (t[0] == "s") {
                model.students.add(t[1]);
                model.student_bias.push_back(need_double(t[2], "student bias"));
                p_rows.push_back(std::move(factors));
            } else {
                model.courses.add(t[1]);
                model.course_bias.push_back(need_double(t[2], "course bias"));
                q_rows.push_back(std::move(factors));
            }
        } else throw DataError("unrecognized model line: " + line);
    }
    model.p = DenseMatrix(static_cast<int>(p_rows.size()), model.latent_dim);
    for (std::size_t i = 0; i < p_rows.size(); ++i)
        for (int f = 0; f < model.latent_dim; ++f) model.p(static_cast<int>(i), f) = p_rows[i][static_cast<std::size_t>(f)];
    model.q = DenseMatrix(static_cast<int>(q_rows.size()), model.latent_dim);
    for (std::size_t j = 0; j < q_rows.size(); ++j)
        for (int f = 0; f < model.latent_dim; ++f) model.q(static_cast<int>(j), f) = q_rows[j][static_cast<std::size_t>(f)];
    return model;
}

void write_predictions(std::ostream& out, const std::vector<ScoredPrediction>& predictions,
                       bool with_actual) {
    out << (with_actual ? "student,course,method,predicted,actual\n"
                        : "student,course,method,predicted\n");
    for (const auto& scored : predictions) {
        const Prediction& p = scored.prediction;
        out << p.student_id << ',' << p.course_id << ',' << method_name(p.method) << ','
            << format_double(p.value);
        if (with_actual) out << ',' << format_double(scored.actual);
        out << '\n';
    }
}

void write_predictions(std::ostream& out, const std::vector<Prediction>& predictions) {
    out << "student,course,method,predicted\n";
    for (const auto& p : predictions)
        out << p.student_id << ',' << p.course_id << ',' << method_name(p.method) << ','
            << format_double(p.value) << '\n';
}

void save_truth(std::ostream& out, const SynthTruth& truth) {
    out << "# gradepred truth v1\n";
    out << "kind " << synth_kind_name(truth.kind) << '\n';
    out << "seed " << truth.seed << '\n';
    out << "noise_sigma " << format_double(truth.noise_sigma) << '\n';
    out << "clip_rate " << format_double(truth.clip_rate) << '\n';
    out << "rank " << truth.rank << '\n';
    out << "mu " << format_double(truth.mu) << '\n';
    for (const auto& [course, level] : truth.course_level) out << "level " << course << ' ' << level << '\n';
    for (const auto& [course, prereqs] : truth.prereqs) {
        out << "prereq " << course;
        for (const auto& p : prereqs) out << ' ' << p;
        out << '\n';
    }
    for (const auto& [student, cluster] : truth.student_cluster)
        out << "cluster " << student << ' ' << cluster << '\n';
    auto write_linear = [&](const char* tag, const std::map<std::string, PlantedLinear>& models) {
        for (const auto& [course, model] : models) {
            out << tag << ' ' << course << ' ' << format_double(model.w0);
            for (const auto& [prereq, weight] : model.weights)
                out << ' ' << prereq << ' ' << format_double(weight);
            out << '\n';
        }
    };
    write_linear("lin_a", truth.linear_a);
    write_linear("lin_b", truth.linear_b);
    for (const auto& [student, bias] : truth.student_bias)
        out << "sb " << student << ' ' << format_double(bias) << '\n';
    for (const auto& [course, bias] : truth.course_bias)
        out << "cb " << course << ' ' << format_double(bias) << '\n';
    auto write_factors = [&](const char* tag, const std::map<std::string, std::vector<double>>& rows) {
        for (const auto& [id, factors] : rows) {
            out << tag << ' ' << id;
            for (double f : factors) out << ' ' << format_double(f);
            out << '\n';
        }
    };
    write_factors("p", truth.p);
    write_factors("q", truth.q);
}

SynthTruth load_truth(std::istream& in) {
    expect_magic(in, "# gradepred truth v1");
    SynthTruth truth;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto t = tokens(line);
        if (t[0] == "kind" && t.size() == 2) {
            auto kind = parse_synth_kind(t[1]);
            if (!kind) throw DataError("unknown synth kind " + t[1]);
            truth.kind = *kind;
        } else if (t[0] == "seed" && t.size() == 2)
            truth.seed = static_cast<std::uint64_t>(need_double(t[1], "seed"));
        else if (t[0] == "noise_sigma" && t.size() == 2)
            truth.noise_sigma = need_double(t[1], "noise_sigma");
        else if (t[0] == "clip_rate" && t.size() == 2) truth.clip_rate = need_double(t[1], "clip_rate");
        else if (t[0] == "rank" && t.size() == 2) truth.rank = need_int(t[1], "rank");
        else if (t[0] == "mu" && t.size() == 2) truth.mu = need_double(t[1], "mu");
        else if (t[0] == "level" && t.size() == 3)
            truth.course_level.emplace(t[1], need_int(t[2], "level"));
        else if (t[0] == "prereq" && t.size() >= 2)
            truth.prereqs.emplace(t[1], std::vector<std::string>(t.begin() + 2, t.end()));
        else if (t[0] == "cluster" && t.size() == 3) truth.student_cluster.emplace(t[1], t[2][0]);
        else if ((t[0] == "lin_a" || t[0] == "lin_b") && t.size() >= 3) {
            PlantedLinear model;
            model.w0 = need_double(t[2], "w0");
            if ((t.size() - 3) % 2 != 0) throw DataError("bad linear truth line: " + line);
            for (std::size_t i = 3; i + 1 < t.size(); i += 2)
                model.weights.emplace(t[i], need_double(t[i + 1], "weight"));
            (t[0] == "lin_a" ? truth.linear_a : truth.linear_b).emplace(t[1], std::move(model));
        } else if (t[0] == "sb" && t.size() == 3)
            truth.student_bias.emplace(t[1], need_double(t[2], "sb"));
        else if (t[0] == "cb" && t.size() == 3)
            truth.course_bias.emplace(t[1], need_double(t[2], "cb"));
        else if ((t[0] == "p" || t[0] == "q") && t.size() >= 2) {
            std::vector<double> factors;
            for (std::size_t i = 2; i < t.size(); ++i) factors.push_back(need_double(t[i], "factor"));
            (t[0] == "p" ? truth.p : truth.q).emplace(t[1], std::move(factors));
        } else throw DataError("unrecognized truth line: " + line);
    }
    return truth;
}

std::uint64_t content_hash(std::istream& in) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buffer[4096];
    while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buffer[i]);
            hash *= 0x100000001b3ULL;
        }
        if (in.eof()) break;
    }
    return hash;
}

} // namespace gradepred
