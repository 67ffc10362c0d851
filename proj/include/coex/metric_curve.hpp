#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace coex
{

inline constexpr const char* kCsvHeader = "scenario,engine,side,metric,threshold,value,stderr";

struct CurvePoint
{
    double threshold = 0.0;
    double value = 0.0;
    double stderr_ = 0.0;
};

/// One metric of one side of one scenario from one engine. A NaN value marks a failed cell.
struct MetricCurve
{
    std::string scenario;
    std::string engine;
    std::string side;
    std::string metric;
    std::vector<CurvePoint> points;

    bool operator==(const MetricCurve& o) const
    {
        auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        if (std::tie(scenario, engine, side, metric) != std::tie(o.scenario, o.engine, o.side, o.metric) ||
            points.size() != o.points.size())
        {
            return false;
        }
        for (size_t i = 0; i < points.size(); ++i)
        {
            if (!same(points[i].threshold, o.points[i].threshold) || !same(points[i].value, o.points[i].value) ||
                !same(points[i].stderr_, o.points[i].stderr_))
            {
                return false;
            }
        }
        return true;
    }
};

namespace detail
{

inline std::string
Exact(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void
CheckField(const std::string& s)
{
    if (s.find_first_of(",\n\r\"") != std::string::npos)
    {
        throw std::invalid_argument("CSV field may not contain separators: '" + s + "'");
    }
}

inline double
ParseDouble(const std::string& s, size_t line)
{
    size_t pos = 0;
    double v = 0.0;
    try
    {
        v = std::stod(s, &pos);
    }
    catch (const std::exception&)
    {
        pos = std::string::npos;
    }
    if (pos != s.size())
    {
        throw std::runtime_error("CSV line " + std::to_string(line) + ": bad number '" + s + "'");
    }
    return v;
}

} // namespace detail

inline void
WriteCsv(std::ostream& os, const std::vector<MetricCurve>& curves)
{
    os << kCsvHeader << '\n';
    for (const MetricCurve& c : curves)
    {
        detail::CheckField(c.scenario);
        detail::CheckField(c.engine);
        detail::CheckField(c.side);
        detail::CheckField(c.metric);
        for (const CurvePoint& p : c.points)
        {
            os << c.scenario << ',' << c.engine << ',' << c.side << ',' << c.metric << ','
               << detail::Exact(p.threshold) << ',' << detail::Exact(p.value) << ',' << detail::Exact(p.stderr_)
               << '\n';
        }
    }
}

/// Rows grouped into curves by (scenario, engine, side, metric), in order of first appearance.
inline std::vector<MetricCurve>
ReadCsv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line))
    {
        throw std::runtime_error("CSV: empty input");
    }
    if (!line.empty() && line.back() == '\r')
    {
        line.pop_back();
    }
    if (line != kCsvHeader)
    {
        throw std::runtime_error("CSV: unexpected header '" + line + "'");
    }
    std::vector<MetricCurve> out;
    std::map<std::tuple<std::string, std::string, std::string, std::string>, size_t> index;
    size_t lineno = 1;
    while (std::getline(is, line))
    {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        if (line.empty())
        {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
        {
            f.push_back(cell);
        }
        if (f.size() != 7)
        {
            throw std::runtime_error("CSV line " + std::to_string(lineno) + ": expected 7 fields");
        }
        auto key = std::make_tuple(f[0], f[1], f[2], f[3]);
        auto it = index.find(key);
        if (it == index.end())
        {
            it = index.emplace(key, out.size()).first;
            out.push_back({f[0], f[1], f[2], f[3], {}});
        }
        out[it->second].points.push_back({detail::ParseDouble(f[4], lineno), detail::ParseDouble(f[5], lineno),
                                          detail::ParseDouble(f[6], lineno)});
    }
    return out;
}

} // namespace coex
