import { CLASS_MENU, UNLABELABLE } from "./types.js";

/** Per-class annotation rules shown in the side panel. */
export const GUIDELINES: Record<string, string> = {
  forest:
    "Tree-cover percentage is greater than 15% and trees taller than 3 m. " +
    "Look for closed or clumped canopy texture and cast shadows.",
  shrubland:
    "Woody vegetation below 3 m; scattered speckled texture over " +
    "brighter ground, no continuous canopy.",
  grassland:
    "Herbaceous cover, smooth and nearly featureless texture with " +
    "seasonal tone shifts.",
  cropland:
    "Managed fields: regular parcel boundaries, uniform interior, " +
    "row or strip patterns.",
  impervious:
    "Built surfaces: roads, roofs, pavement; sharp geometric edges " +
    "and high-contrast materials.",
  water: "Open water: very dark and smooth; shorelines follow terrain.",
  bare: "Bare soil, sand, or rock with little or no vegetation signal.",
  other: "Valid land cover that fits none of the listed classes.",
  [UNLABELABLE]:
    "Too many clouds, too many shadows, or imagery otherwise unusable " +
    "for a confident call. Flagging excludes the sample from training.",
};

export function guidelineFor(className: string): string {
  const text = GUIDELINES[className];
  if (text === undefined) {
    throw new Error(`no guideline for class ${className}`);
  }
  return text;
}

export function assertMenuCovered(): void {
  for (const name of [...CLASS_MENU, UNLABELABLE]) {
    guidelineFor(name);
  }
}
