# Инициализационный файл для пакета services
