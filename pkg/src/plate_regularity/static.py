NAME = "Plate Regularity"
SLUG = "plate_regularity"
