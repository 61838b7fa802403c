#!/usr/bin/env node
import { renderHeatmap } from "./heatmap.js";
import { runScript } from "./cli.js";

const USAGE =
  "usage: plot-heatmap --in map.csv --out map.svg [--dpi N] [--value-col NAME] [--title T]";

runScript(process.argv.slice(2), USAGE, (text, args) =>
  renderHeatmap(text, {
    dpi: args.dpi,
    valueColumn: args.extra.get("value-col"),
    title: args.extra.get("title"),
  }),
);
