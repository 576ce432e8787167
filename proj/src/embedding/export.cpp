#include <sstream>

#include "nadir/embedding.hpp"
#include "nadir/error.hpp"
#include "nadir/text_io.hpp"

namespace nadir::embedding {

void write_embedding_csv(const std::filesystem::path& path, const std::vector<int>& labels, const RealMatrix& y,
                         const GridCoordinates& grid) {
    if (labels.size() != static_cast<std::size_t>(y.rows()) || grid.cells.size() != labels.size())
        throw Error(ErrorCode::ShapeMismatch, "labels, coordinates and grid cells differ in length");
    std::ostringstream out;
    out << "node_id,y1,y2,grid_row,grid_col\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << labels[i] << ',' << text::format_double(y(r, 0)) << ',' << text::format_double(y(r, 1)) << ','
            << grid.cells[i].row << ',' << grid.cells[i].col << '\n';
    }
    text::write_file(path, out.str());
}

EmbeddingRecord read_embedding_csv(const std::filesystem::path& path, int h) {
    std::istringstream in(text::read_file(path));
    std::string line;
    if (!std::getline(in, line) || line.rfind("node_id,y1,y2,grid_row,grid_col", 0) != 0)
        throw Error(ErrorCode::Storage, path.string() + ": missing embedding header");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = text::split(line, ',');
        if (fields.size() != 5) throw Error(ErrorCode::Storage, path.string() + ": malformed row '" + line + "'");
        rows.push_back(std::move(fields));
    }
    EmbeddingRecord rec;
    rec.y.resize(static_cast<Eigen::Index>(rows.size()), 2);
    rec.grid.h = h;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        rec.labels.push_back(static_cast<int>(text::parse_int(rows[i][0])));
        rec.y(r, 0) = text::parse_double(rows[i][1]);
        rec.y(r, 1) = text::parse_double(rows[i][2]);
        GridCell cell{static_cast<int>(text::parse_int(rows[i][3])), static_cast<int>(text::parse_int(rows[i][4]))};
        if (cell.row < 1 || cell.row > h || cell.col < 1 || cell.col > h)
            throw Error(ErrorCode::Storage, path.string() + ": grid cell outside [1, " + std::to_string(h) + "]");
        rec.grid.cells.push_back(cell);
    }
    return rec;
}

std::string embedding_svg(const std::vector<int>& labels, const GridCoordinates& grid) {
    const int cell = 12;
    const int margin = 20;
    const int size = grid.h * cell + 2 * margin;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
        << "\" font-family=\"sans-serif\" font-size=\"9\">\n";
    svg << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << grid.h * cell << "\" height=\""
        << grid.h * cell << "\" fill=\"none\" stroke=\"#888\"/>\n";
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        // Column runs along x, row down the page.
        const double cx = margin + (grid.cells[i].col - 0.5) * cell;
        const double cy = margin + (grid.cells[i].row - 0.5) * cell;
        svg << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"4\" fill=\"#1f77b4\"/>";
        svg << "<text x=\"" << cx + 5 << "\" y=\"" << cy - 3 << "\">" << (i < labels.size() ? labels[i] : 0)
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace nadir::embedding
