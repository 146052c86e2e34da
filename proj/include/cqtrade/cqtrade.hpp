#pragma once

#include "cqtrade/error.hpp"
#include "cqtrade/rational.hpp"
#include "cqtrade/relcore.hpp"
#include "cqtrade/query.hpp"
#include "cqtrade/lp.hpp"
#include "cqtrade/covers.hpp"
#include "cqtrade/join.hpp"
#include "cqtrade/oracle.hpp"
#include "cqtrade/adstruct.hpp"
#include "cqtrade/decomp.hpp"
#include "cqtrade/decomp_structure.hpp"
#include "cqtrade/pathengine.hpp"
#include "cqtrade/generate.hpp"
#include "cqtrade/bench.hpp"
#include "cqtrade/analyze.hpp"
#include "cqtrade/serialize.hpp"
