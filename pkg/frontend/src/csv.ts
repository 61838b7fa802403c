/** Minimal CSV reading with header validation for the toolkit's outputs. */

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text
    .split(/\r?\n/)
    .filter((l) => l.length > 0 && !l.startsWith("#"));
  if (lines.length === 0) {
    throw new Error("empty CSV input");
  }
  const header = lines[0].split(",").map((h) => h.trim());
  const rows = lines.slice(1).map((l) => l.split(",").map((c) => c.trim()));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new Error(
        `malformed CSV row: expected ${header.length} cells, got ${row.length}`,
      );
    }
  }
  return { header, rows };
}

/** Column values as numbers; "nan" and empty cells become NaN. */
export function numericColumn(table: Table, name: string): number[] {
  const k = table.header.indexOf(name);
  if (k < 0) {
    throw new Error(
      `missing column "${name}" (have: ${table.header.join(", ")})`,
    );
  }
  return table.rows.map((r) => {
    const cell = r[k].toLowerCase();
    if (cell === "" || cell === "nan") return NaN;
    const v = Number(r[k]);
    if (Number.isNaN(v) && cell !== "nan") {
      throw new Error(`non-numeric cell "${r[k]}" in column "${name}"`);
    }
    return v;
  });
}

export function requireColumns(table: Table, names: string[]): void {
  for (const n of names) {
    if (!table.header.includes(n)) {
      throw new Error(
        `schema mismatch: column "${n}" not found (have: ${table.header.join(", ")})`,
      );
    }
  }
}
