// Hex utilities: parse the server's canonical hex dump (16 bytes per row,
// offset gutter, masked bytes as "??") and normalize hex answer input.

export interface HexToken {
  offset: number;
  text: string; // two hex digits, or "??" for a masked byte
  masked: boolean;
}

export function parseHexDump(dump: string): HexToken[][] {
  const rows: HexToken[][] = [];
  if (!dump.trim()) return rows;
  for (const line of dump.split("\n")) {
    const gutterEnd = line.indexOf("  ");
    if (gutterEnd < 0) continue;
    const base = parseInt(line.slice(0, gutterEnd), 16);
    const asciiStart = line.indexOf("|");
    const hexRegion =
      asciiStart >= 0 ? line.slice(gutterEnd, asciiStart) : line.slice(gutterEnd);
    const row: HexToken[] = [];
    for (const token of hexRegion.trim().split(/\s+/)) {
      if (!token) continue;
      row.push({
        offset: base + row.length,
        text: token,
        masked: token === "??",
      });
    }
    rows.push(row);
  }
  return rows;
}

// "0x7E,7d:5e" -> "7e 7d 5e"; returns the input unchanged when it does not
// look like hex bytes, so free-text answers are left alone.
export function groupHexInput(raw: string): string {
  const stripped = raw.replace(/0x/gi, "").replace(/[\s:,]/g, "").toLowerCase();
  if (!stripped || !/^[0-9a-f]*$/.test(stripped) || stripped.length % 2 !== 0) {
    return raw;
  }
  const pairs: string[] = [];
  for (let i = 0; i < stripped.length; i += 2) {
    pairs.push(stripped.slice(i, i + 2));
  }
  return pairs.join(" ");
}

// Byte offsets covered by a field, for hex-pane highlighting.
export function fieldByteOffsets(field: {
  byte_offset: number;
  bit_offset: number;
  bit_width: number;
}): Set<number> {
  const bytes = Math.ceil((field.bit_offset + field.bit_width) / 8);
  const out = new Set<number>();
  for (let i = 0; i < bytes; i++) out.add(field.byte_offset + i);
  return out;
}
