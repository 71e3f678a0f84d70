/** Parser for the structured config format used across the project:
 * INI sections of `key = value` lines, '#' or ';' comments. */

export type Section = Map<string, string>;

export function parseIni(text: string): Map<string, Section> {
  const sections = new Map<string, Section>();
  let current: Section | null = null;
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line.length === 0 || line.startsWith("#") || line.startsWith(";")) {
      continue;
    }
    if (line.startsWith("[") && line.endsWith("]")) {
      const name = line.slice(1, -1).trim();
      if (sections.has(name)) {
        throw new Error(`duplicate section [${name}] at line ${i + 1}`);
      }
      current = new Map();
      sections.set(name, current);
      continue;
    }
    const eq = line.indexOf("=");
    if (eq < 0 || current === null) {
      throw new Error(`bad config line ${i + 1}: '${line}'`);
    }
    current.set(line.slice(0, eq).trim(), line.slice(eq + 1).trim());
  }
  return sections;
}
