#pragma once

#include "capcurve/dataset.hpp"
#include "capcurve/error.hpp"
#include "capcurve/fitting.hpp"
#include "capcurve/forecast.hpp"
#include "capcurve/growth.hpp"
#include "capcurve/horizon.hpp"
#include "capcurve/io.hpp"
#include "capcurve/math.hpp"
#include "capcurve/optimize.hpp"
#include "capcurve/pipeline.hpp"
#include "capcurve/svg.hpp"
#include "capcurve/synthetic.hpp"
#include "capcurve/theory.hpp"
#include "capcurve/cli.hpp"
