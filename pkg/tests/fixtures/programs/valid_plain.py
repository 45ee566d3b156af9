import base64

PNG = (
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJ"
    "AAAACklEQVR4nGMAAQAABQABDQottAAAAABJRU5ErkJggg=="
)
with open("chart.png", "wb") as fh:
    fh.write(base64.b64decode(PNG))
