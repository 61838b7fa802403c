#!/usr/bin/env node
import { renderSpectrum } from "./spectrum.js";
import { runScript } from "./cli.js";

const USAGE = "usage: plot-spectrum --in spectrum.csv --out spectrum.svg [--dpi N] [--offset X]";

runScript(process.argv.slice(2), USAGE, (text, args) =>
  renderSpectrum(text, {
    dpi: args.dpi,
    offset: args.extra.has("offset") ? Number(args.extra.get("offset")) : undefined,
  }),
);
