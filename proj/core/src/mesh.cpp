#include "mvsseg/mesh.hpp"

#include "mvsseg/numeric.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace mvsseg {

namespace {

std::vector<char> keepMask(const std::vector<Vec3>& vertices,
                           const std::vector<std::array<std::int32_t, 3>>& tris) {
	std::vector<char> keep(tris.size(), 1);
	for (std::size_t t = 0; t < tris.size(); ++t) {
		const auto& tri = tris[t];
		for (int k = 0; k < 3; ++k) {
			if (tri[k] < 0 || tri[k] >= static_cast<std::int32_t>(vertices.size()))
				throw std::invalid_argument("mesh: triangle references vertex out of range");
		}
		Vec3 e1 = vertices[tri[1]] - vertices[tri[0]];
		Vec3 e2 = vertices[tri[2]] - vertices[tri[0]];
		double a = 0.5 * e1.cross(e2).norm();
		if (!(a >= TriMesh::kDegenerateArea)) keep[t] = 0;
	}
	return keep;
}

}  // namespace

TriMesh TriMesh::build(std::vector<Vec3> vertices,
                       std::vector<std::array<std::int32_t, 3>> triangles) {
	TriMesh mesh;
	std::vector<char> keep = keepMask(vertices, triangles);
	mesh.vertices_ = std::move(vertices);
	mesh.triangles_.reserve(triangles.size());
	for (std::size_t t = 0; t < triangles.size(); ++t) {
		if (keep[t])
			mesh.triangles_.push_back(triangles[t]);
		else
			++mesh.droppedDegenerate_;
	}
	if (mesh.triangles_.empty()) throw std::invalid_argument("mesh: no non-degenerate triangles");

	const std::int32_t nt = mesh.triangleCount();
	mesh.areas_.resize(nt);
	mesh.normals_.resize(nt);
	mesh.centroids_.resize(nt);
	CompensatedSum total;
	for (std::int32_t t = 0; t < nt; ++t) {
		const auto& tri = mesh.triangles_[t];
		const Vec3& v0 = mesh.vertices_[tri[0]];
		const Vec3& v1 = mesh.vertices_[tri[1]];
		const Vec3& v2 = mesh.vertices_[tri[2]];
		Vec3 cross = (v1 - v0).cross(v2 - v0);
		double norm = cross.norm();
		mesh.areas_[t] = 0.5 * norm;
		mesh.normals_[t] = cross / norm;
		mesh.centroids_[t] = (v0 + v1 + v2) / 3.0;
		total.add(mesh.areas_[t]);
	}
	mesh.totalArea_ = total.value();

	// Edge -> incident triangles; adjacency is every triangle sharing an edge.
	std::unordered_map<std::uint64_t, std::vector<std::int32_t>> edges;
	edges.reserve(static_cast<std::size_t>(nt) * 3);
	auto edgeKey = [](std::int32_t a, std::int32_t b) {
		if (a > b) std::swap(a, b);
		return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
		       static_cast<std::uint32_t>(b);
	};
	for (std::int32_t t = 0; t < nt; ++t) {
		const auto& tri = mesh.triangles_[t];
		for (int k = 0; k < 3; ++k) edges[edgeKey(tri[k], tri[(k + 1) % 3])].push_back(t);
	}
	std::vector<std::vector<std::int32_t>> neighbors(nt);
	for (std::int32_t t = 0; t < nt; ++t) {
		const auto& tri = mesh.triangles_[t];
		auto& list = neighbors[t];
		for (int k = 0; k < 3; ++k) {
			for (std::int32_t other : edges[edgeKey(tri[k], tri[(k + 1) % 3])])
				if (other != t) list.push_back(other);
		}
		std::sort(list.begin(), list.end());
		list.erase(std::unique(list.begin(), list.end()), list.end());
	}
	mesh.adjacencyOffsets_.resize(nt + 1, 0);
	for (std::int32_t t = 0; t < nt; ++t)
		mesh.adjacencyOffsets_[t + 1] = mesh.adjacencyOffsets_[t] + neighbors[t].size();
	mesh.adjacency_.resize(mesh.adjacencyOffsets_[nt]);
	for (std::int32_t t = 0; t < nt; ++t)
		std::copy(neighbors[t].begin(), neighbors[t].end(),
		          mesh.adjacency_.begin() + mesh.adjacencyOffsets_[t]);
	return mesh;
}

TriangleSet TriangleSet::fromIndices(const TriMesh& mesh, std::vector<std::int32_t> indices) {
	std::sort(indices.begin(), indices.end());
	indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
	if (!indices.empty() && (indices.front() < 0 || indices.back() >= mesh.triangleCount()))
		throw std::invalid_argument("triangle set: index out of range");
	TriangleSet set;
	CompensatedSum area;
	for (std::int32_t t : indices) area.add(mesh.area(t));
	set.indices_ = std::move(indices);
	set.area_ = area.value();
	return set;
}

bool TriangleSet::contains(std::int32_t t) const {
	return std::binary_search(indices_.begin(), indices_.end(), t);
}

double setArea(const TriMesh& mesh, std::span<const std::int32_t> triangles) {
	std::vector<std::int32_t> sorted(triangles.begin(), triangles.end());
	std::sort(sorted.begin(), sorted.end());
	CompensatedSum acc;
	for (std::int32_t t : sorted) acc.add(mesh.area(t));
	return acc.value();
}

std::vector<TriangleSet> connectedComponents(const TriMesh& mesh, const TriangleSet& subset) {
	std::vector<char> inSet(mesh.triangleCount(), 0);
	for (std::int32_t t : subset.indices()) inSet[t] = 1;
	std::vector<char> visited(mesh.triangleCount(), 0);
	std::vector<TriangleSet> components;
	std::vector<std::int32_t> stack, current;
	for (std::int32_t seed : subset.indices()) {
		if (visited[seed]) continue;
		current.clear();
		stack.assign(1, seed);
		visited[seed] = 1;
		while (!stack.empty()) {
			std::int32_t t = stack.back();
			stack.pop_back();
			current.push_back(t);
			for (std::int32_t n : mesh.adjacent(t)) {
				if (inSet[n] && !visited[n]) {
					visited[n] = 1;
					stack.push_back(n);
				}
			}
		}
		components.push_back(TriangleSet::fromIndices(mesh, current));
	}
	std::stable_sort(components.begin(), components.end(),
	                 [](const TriangleSet& a, const TriangleSet& b) {
		                 if (a.area() != b.area()) return a.area() > b.area();
		                 return a.indices().front() < b.indices().front();
	                 });
	return components;
}

// ---------------------------------------------------------------------------
// PLY / OBJ parsing

namespace {

struct MeshData {
	std::vector<Vec3> vertices;
	std::vector<std::array<std::int32_t, 3>> tris;
	std::vector<std::int32_t> labels;  // aligned with tris when hasLabels
	bool hasLabels = false;
};

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::size_t plySize(PlyType t) {
	switch (t) {
		case PlyType::I8:
		case PlyType::U8: return 1;
		case PlyType::I16:
		case PlyType::U16: return 2;
		case PlyType::I32:
		case PlyType::U32:
		case PlyType::F32: return 4;
		case PlyType::F64: return 8;
	}
	return 0;
}

PlyType plyType(const std::string& name) {
	if (name == "char" || name == "int8") return PlyType::I8;
	if (name == "uchar" || name == "uint8") return PlyType::U8;
	if (name == "short" || name == "int16") return PlyType::I16;
	if (name == "ushort" || name == "uint16") return PlyType::U16;
	if (name == "int" || name == "int32") return PlyType::I32;
	if (name == "uint" || name == "uint32") return PlyType::U32;
	if (name == "float" || name == "float32") return PlyType::F32;
	if (name == "double" || name == "float64") return PlyType::F64;
	throw std::runtime_error("ply: unknown property type '" + name + "'");
}

struct PlyProperty {
	std::string name;
	PlyType type = PlyType::F32;
	bool isList = false;
	PlyType countType = PlyType::U8;
};

struct PlyElement {
	std::string name;
	std::size_t count = 0;
	std::vector<PlyProperty> props;
};

class BinaryCursor {
public:
	BinaryCursor(const char* data, std::size_t size) : data_(data), size_(size) {}

	double read(PlyType t) {
		switch (t) {
			case PlyType::I8: return readAs<std::int8_t>();
			case PlyType::U8: return readAs<std::uint8_t>();
			case PlyType::I16: return readAs<std::int16_t>();
			case PlyType::U16: return readAs<std::uint16_t>();
			case PlyType::I32: return readAs<std::int32_t>();
			case PlyType::U32: return readAs<std::uint32_t>();
			case PlyType::F32: return readAs<float>();
			case PlyType::F64: return readAs<double>();
		}
		return 0.0;
	}
	void skip(std::size_t bytes) {
		require(bytes);
		pos_ += bytes;
	}

private:
	template <class T>
	double readAs() {
		require(sizeof(T));
		T v;
		std::memcpy(&v, data_ + pos_, sizeof(T));
		pos_ += sizeof(T);
		return static_cast<double>(v);
	}
	void require(std::size_t bytes) const {
		if (pos_ + bytes > size_) throw std::runtime_error("ply: unexpected end of file");
	}
	const char* data_;
	std::size_t size_;
	std::size_t pos_ = 0;
};

void appendFace(MeshData& out, const std::vector<std::int32_t>& corners, std::int32_t label) {
	if (corners.size() < 3) throw std::runtime_error("mesh: face with fewer than 3 vertices");
	if (corners.size() > 4)
		throw std::runtime_error("mesh: faces with more than 4 vertices are not supported");
	for (std::size_t k = 2; k < corners.size(); ++k) {
		out.tris.push_back({corners[0], corners[k - 1], corners[k]});
		out.labels.push_back(label);
	}
}

MeshData parsePly(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw std::runtime_error("mesh: cannot open " + path);
	std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

	std::size_t headerEnd = content.find("end_header");
	if (content.compare(0, 3, "ply") != 0 || headerEnd == std::string::npos)
		throw std::runtime_error("ply: malformed header in " + path);
	std::size_t bodyStart = content.find('\n', headerEnd);
	if (bodyStart == std::string::npos) throw std::runtime_error("ply: missing body in " + path);
	++bodyStart;

	bool binary = false;
	std::vector<PlyElement> elements;
	{
		std::istringstream header(content.substr(0, headerEnd));
		std::string line;
		while (std::getline(header, line)) {
			if (!line.empty() && line.back() == '\r') line.pop_back();
			std::istringstream ls(line);
			std::string tag;
			ls >> tag;
			if (tag == "format") {
				std::string fmt;
				ls >> fmt;
				if (fmt == "binary_little_endian")
					binary = true;
				else if (fmt == "ascii")
					binary = false;
				else
					throw std::runtime_error("ply: unsupported format '" + fmt + "'");
			} else if (tag == "element") {
				PlyElement e;
				ls >> e.name >> e.count;
				elements.push_back(std::move(e));
			} else if (tag == "property") {
				if (elements.empty()) throw std::runtime_error("ply: property before element");
				PlyProperty p;
				std::string first;
				ls >> first;
				if (first == "list") {
					std::string countT, valueT;
					ls >> countT >> valueT >> p.name;
					p.isList = true;
					p.countType = plyType(countT);
					p.type = plyType(valueT);
				} else {
					p.type = plyType(first);
					ls >> p.name;
				}
				elements.back().props.push_back(std::move(p));
			}
		}
	}

	MeshData out;
	std::istringstream ascii;
	BinaryCursor cursor(content.data() + bodyStart, content.size() - bodyStart);
	if (!binary) ascii.str(content.substr(bodyStart));

	auto readScalar = [&](PlyType t) -> double {
		if (binary) return cursor.read(t);
		double v = 0.0;
		if (!(ascii >> v)) throw std::runtime_error("ply: unexpected end of ascii body");
		return v;
	};

	for (const PlyElement& elem : elements) {
		if (elem.name == "vertex") {
			int ix = -1, iy = -1, iz = -1;
			for (std::size_t i = 0; i < elem.props.size(); ++i) {
				if (elem.props[i].isList) throw std::runtime_error("ply: list property on vertices");
				if (elem.props[i].name == "x") ix = static_cast<int>(i);
				if (elem.props[i].name == "y") iy = static_cast<int>(i);
				if (elem.props[i].name == "z") iz = static_cast<int>(i);
			}
			if (ix < 0 || iy < 0 || iz < 0)
				throw std::runtime_error("ply: vertex element lacks x/y/z");
			out.vertices.reserve(elem.count);
			std::vector<double> row(elem.props.size());
			for (std::size_t v = 0; v < elem.count; ++v) {
				for (std::size_t i = 0; i < elem.props.size(); ++i)
					row[i] = readScalar(elem.props[i].type);
				out.vertices.emplace_back(row[ix], row[iy], row[iz]);
			}
		} else if (elem.name == "face") {
			int labelProp = -1;
			int listProp = -1;
			for (std::size_t i = 0; i < elem.props.size(); ++i) {
				const auto& p = elem.props[i];
				if (p.isList && (p.name == "vertex_indices" || p.name == "vertex_index"))
					listProp = static_cast<int>(i);
				if (!p.isList && p.name == "building_id") labelProp = static_cast<int>(i);
			}
			if (listProp < 0) throw std::runtime_error("ply: face element lacks vertex_indices");
			out.hasLabels = labelProp >= 0;
			std::vector<std::int32_t> corners;
			for (std::size_t f = 0; f < elem.count; ++f) {
				std::int32_t label = -1;
				corners.clear();
				for (std::size_t i = 0; i < elem.props.size(); ++i) {
					const auto& p = elem.props[i];
					if (p.isList) {
						auto n = static_cast<std::size_t>(readScalar(p.countType));
						for (std::size_t k = 0; k < n; ++k) {
							double v = readScalar(p.type);
							if (static_cast<int>(i) == listProp)
								corners.push_back(static_cast<std::int32_t>(v));
						}
					} else {
						double v = readScalar(p.type);
						if (static_cast<int>(i) == labelProp)
							label = static_cast<std::int32_t>(v);
					}
				}
				appendFace(out, corners, label);
			}
		} else {
			// Unknown element: consume and ignore.
			for (std::size_t r = 0; r < elem.count; ++r) {
				for (const auto& p : elem.props) {
					if (p.isList) {
						auto n = static_cast<std::size_t>(readScalar(p.countType));
						if (binary)
							cursor.skip(n * plySize(p.type));
						else
							for (std::size_t k = 0; k < n; ++k) readScalar(p.type);
					} else {
						readScalar(p.type);
					}
				}
			}
		}
	}
	if (!out.hasLabels) out.labels.clear();
	return out;
}

MeshData parseObj(const std::string& path) {
	std::ifstream in(path);
	if (!in) throw std::runtime_error("mesh: cannot open " + path);
	MeshData out;
	std::string line;
	std::vector<std::int32_t> corners;
	while (std::getline(in, line)) {
		std::istringstream ls(line);
		std::string tag;
		if (!(ls >> tag)) continue;
		if (tag == "v") {
			double x, y, z;
			if (!(ls >> x >> y >> z)) throw std::runtime_error("obj: malformed vertex line");
			out.vertices.emplace_back(x, y, z);
		} else if (tag == "f") {
			corners.clear();
			std::string field;
			while (ls >> field) {
				std::size_t slash = field.find('/');
				long idx = std::stol(field.substr(0, slash));
				if (idx <= 0) throw std::runtime_error("obj: non-positive face index");
				corners.push_back(static_cast<std::int32_t>(idx - 1));
			}
			appendFace(out, corners, -1);
		}
	}
	out.labels.clear();
	return out;
}

MeshData parseMeshFile(const std::string& path) {
	auto dot = path.rfind('.');
	std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
	for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
	if (ext == "obj") return parseObj(path);
	if (ext == "ply") return parsePly(path);
	throw std::runtime_error("mesh: unsupported file extension '" + ext + "'");
}

}  // namespace

TriMesh loadMesh(const std::string& path) {
	MeshData data = parseMeshFile(path);
	return TriMesh::build(std::move(data.vertices), std::move(data.tris));
}

std::optional<std::vector<std::int32_t>> loadPlyFaceLabels(const std::string& path) {
	MeshData data = parseMeshFile(path);
	if (!data.hasLabels) return std::nullopt;
	// Apply the same degenerate-triangle filter as loadMesh so labels align.
	std::vector<char> keep = keepMask(data.vertices, data.tris);
	std::vector<std::int32_t> labels;
	labels.reserve(data.tris.size());
	for (std::size_t t = 0; t < data.tris.size(); ++t)
		if (keep[t]) labels.push_back(data.labels[t]);
	return labels;
}

void saveLabeledPly(const std::string& path, const TriMesh& mesh,
                    std::span<const std::int32_t> faceLabels) {
	if (!faceLabels.empty() &&
	    faceLabels.size() != static_cast<std::size_t>(mesh.triangleCount()))
		throw std::invalid_argument("ply: label count does not match triangle count");
	std::ofstream outFile(path, std::ios::binary);
	if (!outFile) throw std::runtime_error("ply: cannot open " + path + " for writing");

	std::ostringstream header;
	header << "ply\nformat binary_little_endian 1.0\n"
	       << "element vertex " << mesh.vertexCount() << "\n"
	       << "property double x\nproperty double y\nproperty double z\n"
	       << "element face " << mesh.triangleCount() << "\n"
	       << "property list uchar int vertex_indices\n"
	       << "property int building_id\n"
	       << "end_header\n";
	outFile << header.str();

	for (std::int32_t v = 0; v < mesh.vertexCount(); ++v) {
		double xyz[3] = {mesh.vertex(v).x(), mesh.vertex(v).y(), mesh.vertex(v).z()};
		outFile.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
	}
	for (std::int32_t t = 0; t < mesh.triangleCount(); ++t) {
		const auto& tri = mesh.triangle(t);
		unsigned char n = 3;
		std::int32_t label = faceLabels.empty() ? -1 : faceLabels[t];
		outFile.write(reinterpret_cast<const char*>(&n), 1);
		outFile.write(reinterpret_cast<const char*>(tri.data()), 3 * sizeof(std::int32_t));
		outFile.write(reinterpret_cast<const char*>(&label), sizeof(std::int32_t));
	}
	if (!outFile) throw std::runtime_error("ply: write failed for " + path);
}

}  // namespace mvsseg
